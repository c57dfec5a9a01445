#pragma once

// Data-generating process at the base point and the one-parameter submodels
// (exponential covariate tilt, Gaussian mean shift) used for every exact
// likelihood computation in the library.

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace effbound {

// Rows index covariate values, columns index treatment arms.
using Table = Eigen::ArrayXXd;
using Vector = Eigen::ArrayXd;

// Arm index; kUnassigned marks a unit that was not sampled.
using Arm = int;
inline constexpr Arm kUnassigned = -1;

inline constexpr double kDefaultClipEps = 1e-3;

struct CovariateLaw {
  std::vector<std::string> support;
  std::vector<double> probs;

  int size() const { return static_cast<int>(probs.size()); }
};

enum class OutcomeFamily { Gaussian };

struct OutcomeModel {
  int arms = 0;
  Table mu;
  Table sigma2;
  OutcomeFamily family = OutcomeFamily::Gaussian;
};

// tau = E[Y(1) - Y(0)]; requires exactly two arms.
struct AteFunctional {};

// tau = sum_w E[a(x,w) * Y(w) + b(x,w)].
struct GeneralTau {
  Table a;
  Table b;
};

using Functional = std::variant<AteFunctional, GeneralTau>;

// sum_w E[r_k(X,w) p(X,w)] <= c_k for k < rows().
struct ConstraintSpec {
  std::vector<Table> r;
  std::vector<double> c;

  int rows() const { return static_cast<int>(c.size()); }
};

struct Scenario {
  std::string name;
  CovariateLaw covariates;
  OutcomeModel outcomes;
  Functional functional = AteFunctional{};
  std::optional<ConstraintSpec> constraint;

  int strata() const { return covariates.size(); }
  int arms() const { return outcomes.arms; }
  bool isAte() const { return std::holds_alternative<AteFunctional>(functional); }

  // Affine outcome transform y~ = loading * y + offset.
  double loading(int x, int w) const;
  double offset(int x, int w) const;

  Table transformedMean() const;      // mu~ = a mu + b
  Table transformedVariance() const;  // sigma~^2 = a^2 sigma^2

  double prob(int x) const { return covariates.probs[static_cast<std::size_t>(x)]; }
};

struct ValidationIssue {
  std::string field;
  std::string message;
};

struct ValidationReport {
  std::vector<ValidationIssue> issues;

  bool ok() const { return issues.empty(); }
  std::string summary() const;
};

ValidationReport validate(const Scenario& scenario);

// Throws Error(ValidationError) with the report summary if the scenario is invalid.
void requireValid(const Scenario& scenario);

struct AllocationMap;

// Path theta -> P_theta through the base scenario at theta = 0:
//   f_X(x; theta)       = probs(x) exp(theta sX(x)) / Z(theta)
//   f_Y(w)|X(y|x; theta) = Normal(mu(x,w) + theta c_w(x), sigma2(x,w))
class Submodel {
 public:
  Submodel(Scenario base, Vector scoreX, Table meanShift, double clipEps = kDefaultClipEps);

  const Scenario& base() const { return base_; }
  const Vector& scoreX() const { return scoreX_; }
  const Table& meanShift() const { return meanShift_; }
  double clipEps() const { return clipEps_; }

  double logPartition(double theta) const;
  Vector covariateProbs(double theta) const;

  // s_w(y|x) = c_w(x) (y - mu(x,w)) / sigma2(x,w); zero on degenerate arms.
  double scoreY(int x, int w, double y) const;
  double conditionalInfo(int x, int w) const;

  double logRatioX(int x, double theta) const { return theta * scoreX_(x) - logPartition(theta); }
  double logRatioY(int x, int w, double y, double theta) const;

  double outcomeMean(int x, int w, double theta) const {
    return base_.outcomes.mu(x, w) + theta * meanShift_(x, w);
  }

 private:
  Scenario base_;
  Vector scoreX_;
  Table meanShift_;
  double clipEps_;
};

Submodel leastFavorableSubmodel(const Scenario& scenario, const AllocationMap& alloc);
Submodel leastFavorableSubmodel(const Scenario& scenario, const Table& propensity);

struct Informations {
  double covariate = 0.0;  // I_X
  Table conditional;       // I_{Y(w)|X}(x)
};

Informations informations(const Submodel& sub);

// Exact tau(theta) along the submodel.
double tauAt(const Submodel& sub, double theta);

}  // namespace effbound
