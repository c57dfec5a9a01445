#pragma once

// Runs the sections of a StudyConfig and produces deterministic CSV tables,
// a manifest and a JSON summary with pass/fail gates.

#include <effbound/allocation.hpp>
#include <effbound/config.hpp>
#include <effbound/designs.hpp>
#include <effbound/estimators.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace effbound {

inline constexpr const char* kVersion = "0.1.0";

enum class StudySection { Solve, Risk, Lan, All };

struct RunOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> reps;
  unsigned jobs = 0;
};

struct Gate {
  std::string name;
  double value = 0.0;
  double threshold = 0.0;
  std::string relation;  // "<=", ">=", "<"
  bool pass = false;
};

struct ReportBundle {
  std::string manifest;                                     // JSON
  std::vector<std::pair<std::string, std::string>> tables;  // file name, CSV text
  std::string summary;                                      // JSON
  std::vector<Gate> gates;

  bool pass() const;
  const std::string* table(const std::string& name) const;
};

Table resolveAlloc(const AllocRef& ref, const Scenario& s, const AllocationMap& optimal);
DesignRule buildDesign(const DesignSpec& spec, const Scenario& s, const AllocationMap& optimal);

// Nominal assignment probabilities of a rule: its table for iid and blocks,
// uniform for pairs and alternation, the optimal allocation (its target) for
// two-stage, a point mass for full treatment.
Table designPropensity(const DesignRule& rule, const Scenario& s, const AllocationMap& optimal);

Estimator buildEstimator(const EstimatorSpec& spec, const Scenario& s, const Table& designProp,
                         const AllocationMap& optimal);

// Richardson-extrapolated central difference of tau(theta) at 0.
double tauDerivativeAtZero(const Submodel& sub, double step = 1e-3);

std::string formatDouble(double v);  // %.12g, "nan" for NaN

ReportBundle runStudy(const StudyConfig& cfg, StudySection section, const RunOverrides& overrides = {});

void writeBundle(const ReportBundle& bundle, const std::filesystem::path& dir);

}  // namespace effbound
