#pragma once

#include "gcwm/em.hpp"
#include "gcwm/selection.hpp"

#include <iosfwd>
#include <string>

namespace gcwm {

// Fitted-model document: structured JSON with sorted keys, so equal models
// serialize to identical bytes. Posterior memberships are not stored;
// classification recomputes them from the data. Marginal blocks come back
// finalized and ready for the E-step.
void write_model(std::ostream& out, const GcwmModel& model,
                 const SelectionTable* table = nullptr);
void save_model(const std::string& path, const GcwmModel& model,
                const SelectionTable* table = nullptr);

// Throws input_error on malformed documents. When `table` is non-null and
// the document carries a selection table, it is filled in.
GcwmModel read_model(std::istream& in, SelectionTable* table = nullptr);
GcwmModel load_model(const std::string& path,
                     SelectionTable* table = nullptr);

}  // namespace gcwm
