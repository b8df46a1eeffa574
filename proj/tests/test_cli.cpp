#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "gcwm/data.hpp"
#include "gcwm/simgen.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

// Subprocess tests for the command-line front-end. The binary path comes
// from GCWM_CLI_BIN (set by the test registration); everything runs in a
// scratch directory under the system temp root.

namespace fs = std::filesystem;
using namespace gcwm;

namespace {

const fs::path& work_dir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "gcwm_cli_test";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string cli_bin() {
  const char* bin = std::getenv("GCWM_CLI_BIN");
  REQUIRE_MESSAGE(bin != nullptr,
                  "GCWM_CLI_BIN must point at the gcwm binary");
  return bin;
}

// Runs the CLI with the given arguments inside the scratch directory;
// returns the exit code, stdout captured to `capture` when given.
int run_cli(const std::string& args, const std::string& capture = "") {
  std::string cmd = "cd '" + work_dir().string() + "' && '" + cli_bin() +
                    "' " + args;
  cmd += capture.empty() ? " > /dev/null 2>&1"
                         : " > '" + capture + "' 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  REQUIRE_MESSAGE(in.good(), "missing file: " << p.string());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

// Severity-style sample: two Gaussian covariates plus one log-normal.
void write_severity_csv(const fs::path& csv, const fs::path& schema_path,
                        int npc) {
  SimDesign d = severity_study_design();
  d.n_per_component = npc;
  SimSample s = generate_gcwm_study(d, 77);
  Schema schema;
  schema.response = "y";
  schema.covariates = {{"x1", Role::gaussian, {}},
                       {"x2", Role::gaussian, {}},
                       {"x3", Role::lognormal, {}}};
  save_csv(csv.string(), s.data, schema);
  std::ofstream out(schema_path);
  out << "response y\n"
         "covariate x1 gaussian\n"
         "covariate x2 gaussian\n"
         "covariate x3 lognormal\n";
}

void write_zip_csv(const fs::path& csv, const fs::path& schema_path,
                   int npc) {
  SimDesign d = zip_study_design();
  d.n_per_component = npc;
  SimSample s = generate_zip_study(d, 88, ZipCondition::normal);
  Schema schema;
  schema.response = "claims";
  schema.covariates = {{"den", Role::lognormal, {}},
                       {"age", Role::gaussian, {}},
                       {"car", Role::gaussian, {}}};
  save_csv(csv.string(), s.data, schema);
  std::ofstream out(schema_path);
  out << "response claims\n"
         "covariate den lognormal\n"
         "covariate age gaussian\n"
         "covariate car gaussian\n";
}

nlohmann::json load_json(const fs::path& p) {
  std::ifstream in(p);
  REQUIRE_MESSAGE(in.good(), "missing file: " << p.string());
  nlohmann::json j;
  in >> j;
  return j;
}

double best_bic(const nlohmann::json& doc) {
  const auto& table = doc.at("selection_table");
  const int best_k = table.at("best_K").get<int>();
  for (const auto& row : table.at("rows"))
    if (row.at("K").get<int>() == best_k) return row.at("bic").get<double>();
  REQUIRE(false);
  return 0.0;
}

}  // namespace

TEST_CASE("fit selects a component count and writes its artifacts") {
  write_severity_csv(work_dir() / "sev.csv", work_dir() / "sev.schema", 150);
  const int code = run_cli(
      "fit --data sev.csv --schema sev.schema --kind gcwm --k-range 1:3 "
      "--seed 5 --out fit/sev.json");
  CHECK(code == 0);
  const nlohmann::json doc = load_json(work_dir() / "fit/sev.json");
  CHECK(doc.at("K").get<int>() == 3);
  CHECK(doc.at("selection_table").at("best_K").get<int>() == 3);
  CHECK(doc.at("response_kind").get<std::string>() == "gaussian-severity");
  CHECK(doc.at("components").size() == 3);
  CHECK(fs::exists(work_dir() / "fit/sev.selection.tsv"));

  // Selection table lists every candidate.
  const std::string tsv = slurp(work_dir() / "fit/sev.selection.tsv");
  CHECK(tsv.find("# manifest: manifest.jsonl") != std::string::npos);
  CHECK(tsv.find("\n1\t") != std::string::npos);
  CHECK(tsv.find("\n3\t") != std::string::npos);

  // Manifest line is valid JSON naming the command and artifacts.
  std::istringstream manifest(slurp(work_dir() / "fit/manifest.jsonl"));
  std::string line;
  REQUIRE(std::getline(manifest, line));
  const nlohmann::json entry = nlohmann::json::parse(line);
  CHECK(entry.at("command").get<std::string>() == "fit");
  CHECK(entry.at("seed").get<int>() == 5);
  CHECK(entry.at("inputs").size() == 2);
  CHECK(entry.at("outputs").size() == 2);
}

TEST_CASE("repeat fits with one seed are byte-identical") {
  const int c1 = run_cli(
      "fit --data sev.csv --schema sev.schema --kind gcwm --k 3 --seed 11 "
      "--out det/a.json");
  const int c2 = run_cli(
      "fit --data sev.csv --schema sev.schema --kind gcwm --k 3 --seed 11 "
      "--out det/b.json");
  CHECK(c1 == 0);
  CHECK(c2 == 0);
  CHECK(slurp(work_dir() / "det/a.json") == slurp(work_dir() / "det/b.json"));
}

TEST_CASE("all-Gaussian kinds coincide without log-normal covariates") {
  // Two Gaussian covariates only: the re-roled baseline is the same model.
  SimDesign d;
  d.n_per_component = 120;
  d.noise_fraction = 0.05;
  Eigen::VectorXd b1(3), b2(3);
  b1 << 2.0, 1.0, 0.5;
  b2 << -2.0, 1.0, -0.5;
  d.components = {
      {b1, {}, {{"a", Role::gaussian, 0.0, 1.0, false},
                {"b", Role::gaussian, 3.0, 1.0, false}}},
      {b2, {}, {{"a", Role::gaussian, 6.0, 1.0, false},
                {"b", Role::gaussian, -3.0, 1.0, false}}}};
  SimSample s = generate_gcwm_study(d, 31);
  Schema schema;
  schema.response = "y";
  schema.covariates = {{"a", Role::gaussian, {}}, {"b", Role::gaussian, {}}};
  save_csv((work_dir() / "g.csv").string(), s.data, schema);
  std::ofstream(work_dir() / "g.schema")
      << "response y\ncovariate a gaussian\ncovariate b gaussian\n";

  CHECK(run_cli("fit --data g.csv --schema g.schema --kind gcwm --k 2 "
                "--seed 3 --out kinds/g.json") == 0);
  CHECK(run_cli("fit --data g.csv --schema g.schema --kind cwm --k 2 "
                "--seed 3 --out kinds/c.json") == 0);
  CHECK(slurp(work_dir() / "kinds/g.json") ==
        slurp(work_dir() / "kinds/c.json"));
}

TEST_CASE("gcwm beats the all-Gaussian baseline on log-normal data") {
  CHECK(run_cli(
            "fit --data sev.csv --schema sev.schema --kind cwm --k-range 1:3 "
            "--seed 5 --out fit/sev_cwm.json") == 0);
  const double gcwm_bic = best_bic(load_json(work_dir() / "fit/sev.json"));
  const double cwm_bic = best_bic(load_json(work_dir() / "fit/sev_cwm.json"));
  CHECK(gcwm_bic < cwm_bic);
}

TEST_CASE("invalid component counts name the flag and exit 2") {
  const fs::path log = work_dir() / "err.txt";
  CHECK(run_cli("fit --data sev.csv --schema sev.schema --kind gcwm "
                "--k-range 0:3 --out x.json",
                log.string()) == 2);
  CHECK(slurp(log).find("--k-range") != std::string::npos);
  CHECK(run_cli("fit --data sev.csv --schema sev.schema --kind gcwm --k 0 "
                "--out x.json",
                log.string()) == 2);
  CHECK(slurp(log).find("--k") != std::string::npos);
  CHECK(run_cli("fit --data missing.csv --schema sev.schema --kind gcwm "
                "--k 2 --out x.json") == 2);
  CHECK(run_cli("fit --data sev.csv --schema sev.schema --kind bogus --k 2 "
                "--out x.json") == 2);
}

TEST_CASE("classification artifacts are consistent with the data") {
  CHECK(run_cli("classify --model fit/sev.json --data sev.csv --schema "
                "sev.schema --out-prefix cls/run") == 0);

  // Labels: one line per row, clusters 1-based; sizes sum to n.
  std::istringstream labels_csv(slurp(work_dir() / "cls/run.labels.csv"));
  std::string line;
  std::getline(labels_csv, line);  // manifest comment
  std::getline(labels_csv, line);  // header
  CHECK(line == "row,id,label");
  std::vector<int> labels;
  while (std::getline(labels_csv, line)) {
    const auto last = line.rfind(',');
    labels.push_back(std::stoi(line.substr(last + 1)));
  }
  REQUIRE(labels.size() == 450);
  std::map<int, int> sizes;
  for (int l : labels) ++sizes[l];
  CHECK(sizes.size() == 3);
  CHECK(sizes[1] + sizes[2] + sizes[3] == 450);

  // Posterior rows sum to one.
  std::istringstream post_csv(slurp(work_dir() / "cls/run.posteriors.csv"));
  std::getline(post_csv, line);
  std::getline(post_csv, line);
  CHECK(line == "row,p1,p2,p3");
  std::size_t rows = 0;
  while (std::getline(post_csv, line)) {
    double sum = 0.0;
    std::istringstream fields(line);
    std::string field;
    std::getline(fields, field, ',');
    while (std::getline(fields, field, ',')) sum += std::stod(field);
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
    ++rows;
  }
  CHECK(rows == 450);

  // Per-cluster response sd against an independent pass over the raw data.
  std::vector<double> y;
  {
    std::istringstream data_csv(slurp(work_dir() / "sev.csv"));
    std::getline(data_csv, line);
    while (std::getline(data_csv, line))
      y.push_back(std::stod(line.substr(0, line.find(','))));
  }
  REQUIRE(y.size() == labels.size());
  std::map<int, std::pair<double, double>> acc;  // label -> (sum, sumsq)
  for (std::size_t i = 0; i < y.size(); ++i) {
    acc[labels[i]].first += y[i];
    acc[labels[i]].second += y[i] * y[i];
  }
  std::map<int, double> want_sd;
  for (const auto& [label, sums] : acc) {
    const double n = sizes[label];
    const double mean = sums.first / n;
    want_sd[label] = std::sqrt((sums.second - sums.first * mean) / (n - 1));
  }
  // The second block of clusters.txt repeats: cluster min mean max sd.
  std::istringstream clusters(slurp(work_dir() / "cls/run.clusters.txt"));
  std::vector<std::vector<std::string>> rows_txt;
  while (std::getline(clusters, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::vector<std::string> toks;
    std::string t;
    while (ls >> t) toks.push_back(t);
    rows_txt.push_back(std::move(toks));
  }
  int checked = 0;
  for (const auto& toks : rows_txt) {
    if (toks.size() != 5 || toks[0] == "cluster") continue;
    const int label = std::stoi(toks[0]);
    CHECK(std::stod(toks[4]) ==
          doctest::Approx(want_sd[label]).epsilon(1e-3));
    ++checked;
  }
  CHECK(checked == 3);
}

TEST_CASE("single-component classification is all ones") {
  CHECK(run_cli("fit --data sev.csv --schema sev.schema --kind gcwm --k 1 "
                "--seed 2 --out fit/k1.json") == 0);
  CHECK(run_cli("classify --model fit/k1.json --data sev.csv --schema "
                "sev.schema --out-prefix cls/k1") == 0);
  std::istringstream post(slurp(work_dir() / "cls/k1.posteriors.csv"));
  std::string line;
  std::getline(post, line);
  std::getline(post, line);
  CHECK(line == "row,p1");
  while (std::getline(post, line))
    CHECK(line.substr(line.find(',') + 1) == "1.0000000000");
}

TEST_CASE("classify rejects a data file the model was not built for") {
  write_zip_csv(work_dir() / "freq.csv", work_dir() / "freq.schema", 200);
  CHECK(run_cli("classify --model fit/sev.json --data freq.csv --schema "
                "freq.schema --out-prefix cls/bad") == 2);
}

TEST_CASE("zero-inflated fit feeds the likelihood-ratio test") {
  CHECK(run_cli(
            "fit --data freq.csv --schema freq.schema --kind zi-gcwm --k 3 "
            "--seed 6 --restarts 4 --select-response 'log(den),age,car' "
            "--out zi/m.json") == 0);
  CHECK(fs::exists(work_dir() / "zi/m.null.json"));
  const nlohmann::json doc = load_json(work_dir() / "zi/m.json");
  CHECK(doc.at("response_kind").get<std::string>() == "zip-frequency");
  CHECK(doc.at("partition_labels").size() == 600);

  const fs::path table = work_dir() / "lr.txt";
  CHECK(run_cli("lrtest --null zi/m.null.json --alt zi/m.json --per-cluster",
                table.string()) == 0);
  const std::string out = slurp(table);
  CHECK(out.find("pooled") != std::string::npos);
  CHECK(out.find("cluster") != std::string::npos);

  // The same document against itself: no evidence, by construction.
  CHECK(run_cli("lrtest --null zi/m.json --alt zi/m.json",
                table.string()) == 0);
  const std::string same = slurp(table);
  CHECK(same.find("0.0000") != std::string::npos);
  CHECK(same.find("retain") != std::string::npos);
  CHECK(same.find("reject") == std::string::npos);

  // Documents from different partitions are refused.
  CHECK(run_cli(
            "fit --data freq.csv --schema freq.schema --kind zi-gcwm --k 2 "
            "--seed 6 --restarts 4 --select-response 'log(den),age,car' "
            "--out zi/k2.json") == 0);
  CHECK(run_cli("lrtest --null zi/k2.null.json --alt zi/m.json") == 2);

  // A severity document has no frozen partition to test.
  CHECK(run_cli("lrtest --null fit/sev.json --alt fit/sev.json") == 2);
}

TEST_CASE("simulate writes study tables plus plot-ready samples") {
  std::ofstream(work_dir() / "study.cfg")
      << "study zip-classification\n"
         "runs 1\n"
         "seed 21\n"
         "condition normal\n"
         "n-per-component 120\n"
         "restarts 2\n";
  CHECK(run_cli("simulate --config study.cfg --out sim") == 0);
  const std::string table = slurp(work_dir() / "sim/classification_normal.tsv");
  CHECK(table.find("# manifest: manifest.jsonl") != std::string::npos);
  CHECK(table.find("misclassification\t") != std::string::npos);
  CHECK(fs::exists(work_dir() / "sim/confusion_normal.tsv"));
  const std::string sample = slurp(work_dir() / "sim/sample_normal.tsv");
  CHECK(sample.find("row\tcomponent\tvariable\tvalue") != std::string::npos);
  CHECK(sample.find("\tden\t") != std::string::npos);
  CHECK(sample.find("\tresponse\t") != std::string::npos);

  std::ofstream(work_dir() / "sev_study.cfg")
      << "study severity-accuracy\n"
         "runs 2\n"
         "seed 9\n"
         "n-per-component 150\n"
         "restarts 3\n";
  CHECK(run_cli("simulate --config sev_study.cfg --out sim_sev") == 0);
  const std::string acc = slurp(work_dir() / "sim_sev/accuracy.tsv");
  CHECK(acc.find("gcwm\t1\t(intercept)\t") != std::string::npos);
  CHECK(acc.find("cwm\t3\t") != std::string::npos);

  std::ofstream(work_dir() / "cmp_study.cfg")
      << "study partition-comparison\n"
         "runs 1\n"
         "seed 13\n"
         "condition close\n"
         "n-per-component 120\n"
         "restarts 2\n";
  CHECK(run_cli("simulate --config cmp_study.cfg --out sim_cmp") == 0);
  const std::string cmp = slurp(work_dir() / "sim_cmp/comparison_close.tsv");
  CHECK(cmp.find("poisson\t") != std::string::npos);
  CHECK(cmp.find("bernoulli\t") != std::string::npos);
  CHECK(cmp.find("combined\t") != std::string::npos);
}

TEST_CASE("bad study configuration exits with the input-error code") {
  std::ofstream(work_dir() / "bad.cfg")
      << "study zip-classification\ncondition sideways\n";
  CHECK(run_cli("simulate --config bad.cfg --out simbad") == 2);
  CHECK(run_cli("simulate --config study.cfg --out simbad "
                "--condition sideways") == 2);
  CHECK(run_cli("simulate --config nowhere.cfg --out simbad") == 2);
  std::ofstream(work_dir() / "bad2.cfg") << "study severity-accuracy\n";
  CHECK(run_cli("simulate --config bad2.cfg --out simbad "
                "--condition close") == 2);
}
