#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace mgs::cli {

struct Overrides {
  std::optional<std::string> config_path;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  std::optional<std::string> zeta;  // comma separated
  std::optional<std::string> method;
  std::optional<int> steps;
  std::optional<std::string> rule;
  std::optional<double> beta1;
  std::optional<double> beta2;
  std::optional<double> rho;
  std::optional<int> chains;
  std::optional<std::string> kind;  // ablate: beta | steps
  bool quiet = false;
};

// Each returns the process exit code: 0 ok, 1 runtime failure, 2 bad config.
int cmd_sample(const Overrides& o, std::ostream& out, std::ostream& err);
int cmd_sweep(const Overrides& o, std::ostream& out, std::ostream& err);
int cmd_ablate(const Overrides& o, std::ostream& out, std::ostream& err);
int cmd_diagnose(const Overrides& o, std::ostream& out, std::ostream& err);
int cmd_gradcheck(const Overrides& o, std::ostream& out, std::ostream& err);

// The config document after command-line overrides, before validation.
nlohmann::json resolve_document(const Overrides& o, const std::string& command);

}  // namespace mgs::cli
