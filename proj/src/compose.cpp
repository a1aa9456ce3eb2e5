#include "compgen/compose.hpp"

#include "compgen/error.hpp"
#include "compgen/gmm.hpp"
#include "compgen/rng.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>

namespace compgen {

namespace {

int common_dim(const std::vector<WeightedEnergy>& terms, const char* what) {
  if (terms.empty()) throw InputError(std::string(what) + " of an empty list");
  const int dim = terms.front().energy->dim();
  for (const auto& t : terms) {
    if (!t.energy) throw InputError(std::string(what) + " term is null");
    if (t.energy->dim() != dim) {
      throw InputError(std::string(what) + " terms differ in dimension");
    }
  }
  return dim;
}

class ProductEnergy final : public EnergyFunction {
 public:
  ProductEnergy(std::vector<WeightedEnergy> terms, int dim)
      : terms_(std::move(terms)), dim_(dim) {}

  int dim() const override { return dim_; }
  bool has_energy() const override {
    return std::all_of(terms_.begin(), terms_.end(),
                       [](const auto& t) { return t.energy->has_energy(); });
  }
  double energy(const Vector& x) const override {
    check_dim(x);
    double e = 0.0;
    for (const auto& t : terms_) e += t.weight * t.energy->energy(x);
    return e;
  }
  void gradient(const Vector& x, Vector& grad) const override {
    check_dim(x);
    Vector g(dim_);
    grad.setZero(dim_);
    for (const auto& t : terms_) {
      t.energy->gradient(x, g);
      grad.noalias() += t.weight * g;
    }
  }
  double energy_and_gradient(const Vector& x, Vector& grad) const override {
    check_dim(x);
    Vector g(dim_);
    grad.setZero(dim_);
    double e = 0.0;
    for (const auto& t : terms_) {
      e += t.weight * t.energy->energy_and_gradient(x, g);
      grad.noalias() += t.weight * g;
    }
    return e;
  }

 private:
  std::vector<WeightedEnergy> terms_;
  int dim_;
};

class MixtureEnergy final : public EnergyFunction {
 public:
  MixtureEnergy(std::vector<WeightedEnergy> terms, int dim)
      : terms_(std::move(terms)), dim_(dim) {
    for (const auto& t : terms_) log_w_.push_back(std::log(t.weight));
  }

  int dim() const override { return dim_; }
  double energy(const Vector& x) const override {
    check_dim(x);
    std::vector<double> v(terms_.size());
    for (std::size_t i = 0; i < terms_.size(); ++i) {
      v[i] = log_w_[i] - terms_[i].energy->energy(x);
    }
    return -log_sum_exp(v.data(), v.size());
  }
  void gradient(const Vector& x, Vector& grad) const override {
    energy_and_gradient(x, grad);
  }
  double energy_and_gradient(const Vector& x, Vector& grad) const override {
    check_dim(x);
    const std::size_t n = terms_.size();
    std::vector<double> v(n);
    std::vector<Vector> grads(n, Vector(dim_));
    for (std::size_t i = 0; i < n; ++i) {
      v[i] = log_w_[i] - terms_[i].energy->energy_and_gradient(x, grads[i]);
    }
    const double lse = log_sum_exp(v.data(), v.size());
    grad.setZero(dim_);
    for (std::size_t i = 0; i < n; ++i) {
      grad.noalias() += std::exp(v[i] - lse) * grads[i];
    }
    return -lse;
  }

 private:
  std::vector<WeightedEnergy> terms_;
  std::vector<double> log_w_;
  int dim_;
};

class NegationEnergy final : public EnergyFunction {
 public:
  NegationEnergy(EnergyPtr base, EnergyPtr negated, double alpha)
      : base_(std::move(base)), negated_(std::move(negated)), alpha_(alpha) {}

  int dim() const override { return base_->dim(); }
  double energy(const Vector& x) const override {
    check_dim(x);
    return base_->energy(x) - alpha_ * negated_->energy(x);
  }
  void gradient(const Vector& x, Vector& grad) const override {
    check_dim(x);
    Vector g(dim());
    base_->gradient(x, grad);
    negated_->gradient(x, g);
    grad.noalias() -= alpha_ * g;
  }
  double energy_and_gradient(const Vector& x, Vector& grad) const override {
    check_dim(x);
    Vector g(dim());
    const double e = base_->energy_and_gradient(x, grad) -
                     alpha_ * negated_->energy_and_gradient(x, g);
    grad.noalias() -= alpha_ * g;
    return e;
  }

 private:
  EnergyPtr base_;
  EnergyPtr negated_;
  double alpha_;
};

// Directional second derivative by central differences of the gradient.
double curvature(const EnergyFunction& e, const Vector& x, const Vector& u,
                 double h) {
  const Vector up = e.grad(x + h * u);
  const Vector down = e.grad(x - h * u);
  return u.dot(up - down) / (2.0 * h);
}

// Distance scale beyond which a mixture's widest component dominates.
double tail_radius(const GmmEnergy& g) {
  double r = 0.0;
  for (std::size_t k = 0; k < g.components(); ++k) {
    r = std::max(r, g.means()[k].norm() + 6.0 * std::sqrt(g.variances()[k]));
  }
  return r;
}

}  // namespace

EnergyPtr product_energy(const std::vector<WeightedEnergy>& terms) {
  const int dim = common_dim(terms, "product");
  for (const auto& t : terms) {
    if (!(t.weight > 0.0)) throw InputError("product weights must be positive");
  }
  return std::make_shared<ProductEnergy>(terms, dim);
}

EnergyPtr mixture_energy(const std::vector<WeightedEnergy>& terms) {
  const int dim = common_dim(terms, "mixture");
  double total = 0.0;
  for (const auto& t : terms) {
    if (!(t.weight > 0.0)) throw InputError("mixture weights must be positive");
    total += t.weight;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw InputError("mixture weights sum to " + std::to_string(total) + ", not 1");
  }
  return std::make_shared<MixtureEnergy>(terms, dim);
}

EnergyPtr negation_energy(EnergyPtr base, EnergyPtr negated, double alpha,
                          const NegationCheck& check) {
  if (!base || !negated) throw InputError("negation of a null energy");
  if (base->dim() != negated->dim()) {
    throw InputError("negation operands differ in dimension");
  }
  if (!(alpha >= 0.0)) throw InputError("negation exponent must be >= 0");
  auto result = std::make_shared<NegationEnergy>(base, negated, alpha);
  if (alpha == 0.0) return result;

  const auto* gb = dynamic_cast<const GmmEnergy*>(base.get());
  const auto* gn = dynamic_cast<const GmmEnergy*>(negated.get());
  const bool analytic = gb && gn;
  const bool strict = check.strict || analytic;
  // Analytic operands are probed far out, where the widest components set
  // the quadratic growth and hence integrability.
  const double radius =
      analytic ? 4.0 * std::max({tail_radius(*gb), tail_radius(*gn), 1.0})
               : check.radius;

  Rng rng(check.seed);
  const int dim = base->dim();
  double worst = std::numeric_limits<double>::infinity();
  for (int p = 0; p < check.probes; ++p) {
    Vector u(dim);
    for (int d = 0; d < dim; ++d) u[d] = rng.normal();
    u.normalize();
    const double r = analytic ? radius : radius * rng.uniform();
    Vector dir(dim);
    for (int d = 0; d < dim; ++d) dir[d] = rng.normal();
    const Vector x = r * dir.normalized();
    worst = std::min(worst, curvature(*result, x, u, 1e-3));
  }
  if (!(worst > 0.0)) {
    const std::string msg = "negation with alpha = " + std::to_string(alpha) +
                            " has curvature " + std::to_string(worst) +
                            " at a probe point; the composed density is not "
                            "integrable";
    if (strict) throw ConstructionError(msg);
    std::cerr << "warning: " << msg << "\n";
  }
  return result;
}

CompositionSpec CompositionSpec::leaf(std::string ref) {
  CompositionSpec s;
  s.op = Op::Leaf;
  s.ref = std::move(ref);
  return s;
}

CompositionSpec CompositionSpec::product(std::vector<CompositionSpec> children,
                                         std::vector<double> weights) {
  CompositionSpec s;
  s.op = Op::Product;
  if (weights.empty()) weights.assign(children.size(), 1.0);
  s.children = std::move(children);
  s.weights = std::move(weights);
  return s;
}

CompositionSpec CompositionSpec::mixture(std::vector<CompositionSpec> children,
                                         std::vector<double> weights) {
  CompositionSpec s;
  s.op = Op::Mixture;
  if (weights.empty()) weights.assign(children.size(), 1.0 / children.size());
  s.children = std::move(children);
  s.weights = std::move(weights);
  return s;
}

CompositionSpec CompositionSpec::negation(CompositionSpec base,
                                          CompositionSpec negated, double alpha) {
  CompositionSpec s;
  s.op = Op::Negation;
  s.children = {std::move(base), std::move(negated)};
  s.weights = {alpha};
  return s;
}

void CompositionSpec::validate() const {
  switch (op) {
    case Op::Leaf:
      if (ref.empty()) throw ConfigError("leaf without a ref");
      if (!children.empty()) throw ConfigError("leaf '" + ref + "' has children");
      return;
    case Op::Product:
    case Op::Mixture: {
      if (children.empty()) throw ConfigError(std::string(op_name(op)) + " without children");
      if (weights.size() != children.size()) {
        throw ConfigError(std::string(op_name(op)) + " needs one weight per child");
      }
      double total = 0.0;
      for (double w : weights) {
        if (!(w > 0.0)) throw ConfigError(std::string(op_name(op)) + " weights must be > 0");
        total += w;
      }
      if (op == Op::Mixture && std::abs(total - 1.0) > 1e-9) {
        throw ConfigError("mixture weights must sum to 1");
      }
      break;
    }
    case Op::Negation:
      if (children.size() != 2) throw ConfigError("negation needs exactly two children");
      if (weights.size() != 1 || !(weights[0] >= 0.0)) {
        throw ConfigError("negation needs a single exponent alpha >= 0");
      }
      break;
  }
  for (const auto& c : children) c.validate();
}

std::vector<std::string> CompositionSpec::refs() const {
  if (op == Op::Leaf) return {ref};
  std::vector<std::string> out;
  for (const auto& c : children) {
    auto sub = c.refs();
    out.insert(out.end(), sub.begin(), sub.end());
  }
  return out;
}

const char* op_name(CompositionSpec::Op op) {
  switch (op) {
    case CompositionSpec::Op::Leaf: return "leaf";
    case CompositionSpec::Op::Product: return "product";
    case CompositionSpec::Op::Mixture: return "mixture";
    case CompositionSpec::Op::Negation: return "negation";
  }
  return "?";
}

CompositionSpec::Op op_from_name(const std::string& name) {
  if (name == "leaf") return CompositionSpec::Op::Leaf;
  if (name == "product") return CompositionSpec::Op::Product;
  if (name == "mixture") return CompositionSpec::Op::Mixture;
  if (name == "negation") return CompositionSpec::Op::Negation;
  throw ConfigError("unknown composition op '" + name +
                    "' (expected product, mixture, negation or leaf)");
}

EnergyPtr build_energy(const CompositionSpec& spec,
                       const std::map<std::string, EnergyPtr>& registry,
                       const NegationCheck& check) {
  spec.validate();
  switch (spec.op) {
    case CompositionSpec::Op::Leaf: {
      auto it = registry.find(spec.ref);
      if (it == registry.end()) throw ConfigError("unregistered energy '" + spec.ref + "'");
      return it->second;
    }
    case CompositionSpec::Op::Product:
    case CompositionSpec::Op::Mixture: {
      std::vector<WeightedEnergy> terms;
      for (std::size_t i = 0; i < spec.children.size(); ++i) {
        terms.push_back({build_energy(spec.children[i], registry, check), spec.weights[i]});
      }
      if (terms.size() == 1 && spec.weights[0] == 1.0) return terms[0].energy;
      return spec.op == CompositionSpec::Op::Product ? product_energy(terms)
                                                     : mixture_energy(terms);
    }
    case CompositionSpec::Op::Negation:
      return negation_energy(build_energy(spec.children[0], registry, check),
                             build_energy(spec.children[1], registry, check),
                             spec.weights[0], check);
  }
  throw ConfigError("malformed composition");
}

namespace {

class ComposedFamily final : public DiffusedEnergyFamily {
 public:
  ComposedFamily(std::map<std::string, FamilyPtr> families, CompositionSpec spec)
      : families_(std::move(families)), spec_(std::move(spec)) {
    const FamilyPtr& first = families_.begin()->second;
    schedule_ = &first->schedule();
    dim_ = first->dim();
    for (const auto& [name, f] : families_) {
      min_level_ = std::max(min_level_, f->min_level());
      has_energy_ = has_energy_ && f->has_energy();
    }
    // Intermediate negations of learned or mixed families cannot be probed
    // reliably level by level; only warn there.
    NegationCheck check;
    for (int t = min_level_; t <= schedule_->levels(); ++t) {
      std::map<std::string, EnergyPtr> registry;
      for (const auto& [name, f] : families_) registry[name] = f->slice(t);
      slices_.push_back(build_energy(spec_, registry, check));
    }
  }

  const NoiseSchedule& schedule() const override { return *schedule_; }
  int dim() const override { return dim_; }
  bool has_energy() const override { return has_energy_; }
  int min_level() const override { return min_level_; }

  double level_energy(const Vector& x, int t) const override {
    return at(t).energy(x);
  }
  void level_gradient(const Vector& x, int t, Vector& grad) const override {
    at(t).gradient(x, grad);
  }
  double level_energy_and_gradient(const Vector& x, int t,
                                   Vector& grad) const override {
    return at(t).energy_and_gradient(x, grad);
  }
  void level_gradient_batch(const Matrix& xs, int t, Matrix& grads) const override {
    check_level(t);
    if (!batch_gradient(spec_, xs, t, grads)) {
      DiffusedEnergyFamily::level_gradient_batch(xs, t, grads);
    }
  }

 private:
  const EnergyFunction& at(int t) const {
    check_level(t);
    return *slices_[t - min_level_];
  }

  // Products of leaves can use the children's batched gradients.
  bool batch_gradient(const CompositionSpec& s, const Matrix& xs, int t,
                      Matrix& grads) const {
    if (s.op == CompositionSpec::Op::Leaf) {
      families_.at(s.ref)->level_gradient_batch(xs, t, grads);
      return true;
    }
    if (s.op != CompositionSpec::Op::Product) return false;
    Matrix part;
    grads.setZero(xs.rows(), xs.cols());
    for (std::size_t i = 0; i < s.children.size(); ++i) {
      if (!batch_gradient(s.children[i], xs, t, part)) return false;
      grads.noalias() += s.weights[i] * part;
    }
    return true;
  }

  std::map<std::string, FamilyPtr> families_;
  CompositionSpec spec_;
  const NoiseSchedule* schedule_ = nullptr;
  int dim_ = 0;
  int min_level_ = 0;
  bool has_energy_ = true;
  std::vector<EnergyPtr> slices_;
};

}  // namespace

FamilyPtr compose_diffused(const std::map<std::string, FamilyPtr>& families,
                           const CompositionSpec& spec) {
  spec.validate();
  if (families.empty()) throw InputError("compose_diffused without families");
  std::map<std::string, FamilyPtr> used;
  for (const auto& ref : spec.refs()) {
    auto it = families.find(ref);
    if (it == families.end()) throw ConfigError("unregistered family '" + ref + "'");
    used[ref] = it->second;
  }
  const FamilyPtr& first = used.begin()->second;
  for (const auto& [name, f] : used) {
    if (!(f->schedule() == first->schedule())) {
      throw InputError("family '" + name + "' uses a different noise schedule");
    }
    if (f->dim() != first->dim()) {
      throw InputError("family '" + name + "' differs in dimension");
    }
  }
  return std::make_shared<ComposedFamily>(std::move(used), spec);
}

}  // namespace compgen
