#ifndef KBLAB_SUITES_HPP
#define KBLAB_SUITES_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace kblab {
namespace labcli {

/// One verification check: what was measured, against which threshold, with
/// the literature reference the check certifies.
struct CheckRecord {
  std::string id;
  std::string paper_ref;
  std::string status;  // "pass" | "fail" | "skip"
  double measured = 0.0;
  double threshold = 0.0;
  std::string note;  // detail, or the reason when status == "skip"
};

struct SuiteReport {
  std::string suite;
  std::uint64_t seed = 0;
  std::vector<CheckRecord> checks;

  bool passed() const;
  void add_pass_fail(const std::string& id, const std::string& paper_ref,
                     bool ok, double measured, double threshold,
                     const std::string& note = "");
};

struct SuiteContext {
  std::uint64_t seed = 0;
  std::string artifact_dir;  // when nonempty, suites may write data tables
};

/// Names of all registered verification suites, in execution order.
std::vector<std::string> list_suites();
std::string suite_description(const std::string& name);
bool suite_exists(const std::string& name);

/// Execute one suite. Reports are deterministic functions of the seed.
SuiteReport run_suite(const std::string& name, const SuiteContext& ctx);

}  // namespace labcli
}  // namespace kblab

#endif  // KBLAB_SUITES_HPP
