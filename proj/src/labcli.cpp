#include "kblab/labcli.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "kblab/matrix_io.hpp"
#include "kblab/schemes.hpp"

namespace fs = std::filesystem;

namespace kblab {
namespace labcli {

namespace {

std::string resolve(const std::string& base_dir, const std::string& name) {
  fs::path p(name);
  if (p.is_absolute() || base_dir.empty()) return name;
  return (fs::path(base_dir) / p).string();
}

Matrix load_matrix(const nlohmann::json& section, const char* key,
                   const std::string& base_dir) {
  if (!section.contains(key))
    throw ConfigError(std::string("config: model section missing key ") + key);
  return matlib::read_matrix_file(
      resolve(base_dir, section.at(key).get<std::string>()));
}

std::shared_ptr<const schemes::AssociationScheme> load_scheme(
    const std::string& path) {
  const Matrix labels = matlib::read_matrix_file(path);
  Eigen::MatrixXi lab(labels.rows(), labels.cols());
  for (Eigen::Index i = 0; i < labels.rows(); ++i)
    for (Eigen::Index j = 0; j < labels.cols(); ++j) {
      const double v = labels(i, j);
      if (v != std::floor(v) || v < 0)
        throw ConfigError(path + ": scheme class labels must be nonnegative integers");
      lab(i, j) = static_cast<int>(v);
    }
  return std::make_shared<schemes::AssociationScheme>(
      schemes::from_partition(lab));
}

std::vector<Eigen::Index> partition_from_json(const nlohmann::json& j) {
  std::vector<Eigen::Index> partition;
  for (const auto& v : j) {
    const long idx = v.get<long>();
    if (idx < 1) throw ConfigError("config: partition indices are 1-based");
    partition.push_back(idx - 1);
  }
  return partition;
}

}  // namespace

regmaps::RegMap map_from_json(const nlohmann::json& section,
                              const std::string& base_dir, Eigen::Index dim) {
  const std::string kind = section.value("kind", "");
  if (kind == "identity") return regmaps::make_identity();
  if (kind == "inflation") {
    if (!section.contains("epsilon"))
      throw ConfigError("config: inflation map needs key epsilon");
    Matrix t = section.contains("T_file")
                   ? matlib::read_matrix_file(
                         resolve(base_dir, section.at("T_file").get<std::string>()))
                   : Matrix(Matrix::Identity(dim, dim));
    return regmaps::make_inflation(section.at("epsilon").get<double>(), t);
  }
  if (kind == "mask") {
    if (!section.contains("L_file"))
      throw ConfigError("config: mask map needs key L_file");
    return regmaps::make_hadamard_mask(matlib::read_matrix_file(
        resolve(base_dir, section.at("L_file").get<std::string>())));
  }
  if (kind == "scheme") {
    if (!section.contains("scheme_file"))
      throw ConfigError("config: scheme map needs key scheme_file");
    return regmaps::make_scheme_projection(load_scheme(
        resolve(base_dir, section.at("scheme_file").get<std::string>())));
  }
  if (kind == "shrinkage") {
    if (!section.contains("eps1") || !section.contains("eps2"))
      throw ConfigError("config: shrinkage map needs keys eps1 and eps2");
    regmaps::TargetSpec target;
    if (section.contains("iota")) {
      target = regmaps::MaskBand{section.at("iota").get<int>()};
    } else if (section.contains("scheme_file")) {
      target = regmaps::SchemeTarget{load_scheme(
          resolve(base_dir, section.at("scheme_file").get<std::string>()))};
    } else if (section.contains("partition")) {
      target = regmaps::NystromTarget{partition_from_json(section.at("partition"))};
    } else {
      throw ConfigError(
          "config: shrinkage map needs one of iota, scheme_file, partition");
    }
    return regmaps::make_stein_shrinkage(section.at("eps1").get<double>(),
                                         section.at("eps2").get<double>(),
                                         std::move(target));
  }
  if (kind == "nystrom") {
    if (!section.contains("partition"))
      throw ConfigError("config: nystrom map needs key partition");
    return regmaps::make_nystrom(partition_from_json(section.at("partition")), dim);
  }
  throw ConfigError("config: unknown map kind \"" + kind + "\"");
}

void apply_overrides(nlohmann::json& config,
                     const std::map<std::string, std::string>& env) {
  constexpr const char* kPrefix = "KBLAB_";
  const std::vector<std::string> sections = {"model", "map", "run"};
  for (const auto& [key, value] : env) {
    if (key.rfind(kPrefix, 0) != 0) continue;
    std::string path = key.substr(std::string(kPrefix).size());
    std::transform(path.begin(), path.end(), path.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    nlohmann::json parsed;
    try {
      parsed = nlohmann::json::parse(value);
    } catch (const nlohmann::json::parse_error&) {
      parsed = value;  // plain string
    }
    bool nested = false;
    for (const auto& section : sections) {
      if (path.rfind(section + "_", 0) == 0) {
        config[section][path.substr(section.size() + 1)] = parsed;
        nested = true;
        break;
      }
    }
    if (!nested) config[path] = parsed;  // top-level keys like out_dir
  }
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open config file");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }

  std::map<std::string, std::string> env;
  for (char** e = environ; e != nullptr && *e != nullptr; ++e) {
    const std::string entry(*e);
    const auto eq = entry.find('=');
    if (eq != std::string::npos)
      env[entry.substr(0, eq)] = entry.substr(eq + 1);
  }
  apply_overrides(doc, env);

  const std::string base_dir = fs::path(path).parent_path().string();
  RunConfig config;

  if (doc.contains("run")) {
    const auto& run = doc.at("run");
    config.t_end = run.value("t_end", config.t_end);
    config.step = run.value("step", config.step);
    config.v = run.value("v", config.v);
    if (!run.contains("seed"))
      throw ConfigError(path + ": run.seed must be explicit");
    config.seed = run.at("seed").get<std::uint64_t>();
    if (run.contains("ensemble_sizes"))
      config.ensemble_sizes = run.at("ensemble_sizes").get<std::vector<int>>();
    config.replicates = run.value("replicates", config.replicates);
    if (config.step <= 0.0) throw ConfigError(path + ": run.step must be positive");
  } else {
    throw ConfigError(path + ": missing run section (seeds must be explicit)");
  }

  if (doc.contains("model")) {
    const auto& m = doc.at("model");
    const Matrix a = load_matrix(m, "A", base_dir);
    const Matrix r = load_matrix(m, "R", base_dir);
    const Matrix c = load_matrix(m, "C", base_dir);
    const Matrix sigma = load_matrix(m, "Sigma", base_dir);
    const Matrix x0 = load_matrix(m, "x0_mean", base_dir);
    const Matrix p0 = load_matrix(m, "P0", base_dir);
    if (x0.cols() != 1)
      throw ConfigError(path + ": x0_mean must be a column vector");
    config.model =
        make_filter_model(a, r, c, sigma, Vector(x0.col(0)), p0);
  }

  if (doc.contains("map")) {
    if (!config.model)
      throw ConfigError(path + ": map section requires a model section");
    config.map =
        map_from_json(doc.at("map"), base_dir, config.model->dim());
  }

  if (doc.contains("suites")) {
    config.suites = doc.at("suites").get<std::vector<std::string>>();
    for (const auto& s : config.suites)
      if (!suite_exists(s)) throw ConfigError(path + ": unknown suite " + s);
  }
  if (doc.contains("out_dir"))
    config.out_dir = resolve(base_dir, doc.at("out_dir").get<std::string>());
  return config;
}

nlohmann::json report_to_json(const SuiteReport& report) {
  nlohmann::json j;
  j["suite"] = report.suite;
  j["overall"] = report.passed() ? "pass" : "fail";
  j["environment"] = {{"version", kVersion}, {"seed", report.seed}};
  j["checks"] = nlohmann::json::array();
  for (const auto& check : report.checks) {
    if (check.paper_ref.empty())
      throw Error("report: check " + check.id + " lacks a paper_ref");
    if (check.status == "skip" && check.note.empty())
      throw Error("report: check " + check.id + " skipped without a reason");
    nlohmann::json c = {{"id", check.id},
                        {"paper_ref", check.paper_ref},
                        {"status", check.status},
                        {"measured", check.measured},
                        {"threshold", check.threshold}};
    if (!check.note.empty()) c["note"] = check.note;
    j["checks"].push_back(std::move(c));
  }
  return j;
}

void write_trajectory_csv(const std::string& path,
                          const riccati::FlowTrajectory& traj) {
  std::ofstream out(path);
  if (!out) throw ConfigError(path + ": cannot open for writing");
  const Eigen::Index r = traj.states.empty() ? 0 : traj.states.front().rows();
  out << "t";
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < r; ++j) out << ",p_" << i << "_" << j;
  out << "\n";
  out << std::setprecision(17);
  for (std::size_t k = 0; k < traj.times.size(); ++k) {
    out << traj.times[k];
    for (Eigen::Index i = 0; i < r; ++i)
      for (Eigen::Index j = 0; j < r; ++j) out << "," << traj.states[k](i, j);
    out << "\n";
  }
}

bool run(const RunConfig& config) {
  fs::create_directories(config.out_dir);

  bool all_passed = true;
  nlohmann::json stamp;
  stamp["version"] = kVersion;
  stamp["seed"] = config.seed;
  stamp["suites"] = config.suites;

  if (config.model) {
    const auto nominal =
        riccati::flow(*config.model, riccati::Nominal{}, config.model->P0,
                      config.t_end, config.step);
    write_trajectory_csv(config.out_dir + "/trajectory_nominal.csv", nominal);
    if (config.map) {
      const auto perturbed =
          riccati::flow(*config.model, riccati::Perturbed{*config.map},
                        config.model->P0, config.t_end, config.step);
      write_trajectory_csv(config.out_dir + "/trajectory_perturbed.csv",
                           perturbed);
    }
  }

  nlohmann::json results = nlohmann::json::array();
  for (const auto& name : config.suites) {
    const SuiteReport report =
        run_suite(name, SuiteContext{config.seed, config.out_dir});
    const nlohmann::json j = report_to_json(report);
    std::ofstream out(config.out_dir + "/suite_" + name + ".json");
    out << j.dump(2) << "\n";
    results.push_back({{"suite", name}, {"overall", j["overall"]}});
    if (!report.passed()) all_passed = false;
  }
  stamp["results"] = results;

  std::ofstream out(config.out_dir + "/stamp.json");
  out << stamp.dump(2) << "\n";
  return all_passed;
}

SuiteReport verify(const std::string& suite_name, std::uint64_t seed,
                   const std::string& artifact_dir) {
  if (!suite_exists(suite_name))
    throw ConfigError("unknown suite: " + suite_name);
  return run_suite(suite_name, SuiteContext{seed, artifact_dir});
}

void emit_plot_data(const std::string& in_dir, const std::string& out_dir) {
  if (!fs::is_directory(in_dir))
    throw ConfigError(in_dir + ": artifact directory does not exist");
  fs::create_directories(out_dir);

  // decay curves -> long format {series, t, log_gap}
  {
    std::ofstream out(out_dir + "/plot_decay.csv");
    out << "series,t,log_gap\n";
    out << std::setprecision(17);
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(in_dir)) {
      const std::string name = entry.path().filename().string();
      if (name.rfind("decay_", 0) == 0 && entry.path().extension() == ".csv")
        files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
      std::string series = file.stem().string().substr(6);
      std::ifstream in(file);
      std::string line;
      std::getline(in, line);  // header
      while (std::getline(in, line)) {
        const auto comma = line.find(',');
        if (comma == std::string::npos) continue;
        const double t = std::stod(line.substr(0, comma));
        const double gap = std::stod(line.substr(comma + 1));
        if (gap <= 0.0) continue;
        out << series << "," << t << "," << std::log(gap) << "\n";
      }
    }
  }

  // mean-field sweep -> {N, mean_err, stderr}
  {
    std::ofstream out(out_dir + "/plot_meanfield.csv");
    out << "N,mean_err,stderr\n";
    out << std::setprecision(17);
    const fs::path meanfield = fs::path(in_dir) / "meanfield.json";
    if (fs::exists(meanfield)) {
      std::ifstream in(meanfield);
      nlohmann::json j = nlohmann::json::parse(in);
      const auto& ns = j.at("N");
      const auto& means = j.at("mean_err");
      const auto& ses = j.at("stderr");
      for (std::size_t i = 0; i < ns.size(); ++i)
        out << ns[i].get<long>() << "," << means[i].get<double>() << ","
            << ses[i].get<double>() << "\n";
    }
  }
}

}  // namespace labcli
}  // namespace kblab
