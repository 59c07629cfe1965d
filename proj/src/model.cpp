#include "sparseobs/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "sparseobs/errors.hpp"
#include "sparseobs/rng.hpp"

namespace sparseobs {

namespace {

constexpr double kRowSumTol = 1e-12;
constexpr double kSymmetryTol = 1e-12;
constexpr int kMaxBuiltinArity = 64;
constexpr double kInf = std::numeric_limits<double>::infinity();

std::string tuple_str(std::span<const int> xs) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < xs.size(); ++i) os << (i ? "," : "") << xs[i];
  os << ']';
  return os.str();
}

void enumerate_sorted_tuples(int arity, int q, std::vector<std::vector<int>>& out) {
  std::vector<int> cur(arity);
  // Lexicographic enumeration of non-decreasing tuples.
  auto rec = [&](auto&& self, int pos, int low) -> void {
    if (pos == arity) {
      out.push_back(cur);
      return;
    }
    for (int v = low; v < q; ++v) {
      cur[pos] = v;
      self(self, pos + 1, v);
    }
  };
  rec(rec, 0, 0);
}

double binom(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  k = std::min(k, n - k);
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

// Non-decreasing sequences of given length with values in [low, q).
std::size_t count_tails(int q, int low, int len) {
  return static_cast<std::size_t>(std::llround(binom(q - low + len - 1, len)));
}

}  // namespace

void Prior::validate() const {
  if (q < 2) throw ValidationError("prior: alphabet size must be >= 2");
  if (static_cast<int>(probs.size()) != q)
    throw ValidationError("prior: length does not match alphabet size");
  double s = 0.0;
  for (double p : probs) {
    if (p < 0 || !std::isfinite(p)) throw ValidationError("prior: negative or non-finite mass");
    s += p;
  }
  if (std::fabs(s - 1.0) > kRowSumTol)
    throw ValidationError("prior: does not sum to 1");
}

double Prior::entropy() const { return dist_entropy(probs); }

int DiscreteKernel::rank_sorted(std::span<const int> sorted) const {
  std::size_t rank = 0;
  int low = 0;
  for (int j = 0; j < arity_; ++j) {
    for (int w = low; w < sorted[j]; ++w)
      rank += count_tails(q_, w, arity_ - j - 1);
    low = sorted[j];
  }
  return static_cast<int>(rank);
}

double DiscreteKernel::value(int y, std::span<const int> xs) const {
  if (y < 0 || y >= s_) throw ValidationError("kernel: output symbol out of range");
  if (static_cast<int>(xs.size()) != arity_)
    throw ValidationError("kernel: input arity mismatch");
  std::vector<int> sorted(xs.begin(), xs.end());
  std::sort(sorted.begin(), sorted.end());
  if (!sorted.empty() && (sorted.front() < 0 || sorted.back() >= q_))
    throw ValidationError("kernel: input symbol out of range");
  return table_[static_cast<std::size_t>(rank_sorted(sorted)) * s_ + y];
}

std::vector<double> DiscreteKernel::row(std::span<const int> xs) const {
  if (static_cast<int>(xs.size()) != arity_)
    throw ValidationError("kernel: input arity mismatch");
  std::vector<int> sorted(xs.begin(), xs.end());
  std::sort(sorted.begin(), sorted.end());
  if (!sorted.empty() && (sorted.front() < 0 || sorted.back() >= q_))
    throw ValidationError("kernel: input symbol out of range");
  const std::size_t base = static_cast<std::size_t>(rank_sorted(sorted)) * s_;
  return std::vector<double>(table_.begin() + base, table_.begin() + base + s_);
}

DiscreteKernel DiscreteKernel::from_function(
    int arity, int q, int s, const std::function<double(int, std::span<const int>)>& fn) {
  if (arity < 0) throw ValidationError("kernel: negative arity");
  if (q < 2) throw ValidationError("kernel: alphabet size must be >= 2");
  if (s < 1) throw ValidationError("kernel: output alphabet must be nonempty");
  DiscreteKernel k;
  k.arity_ = arity;
  k.q_ = q;
  k.s_ = s;
  enumerate_sorted_tuples(arity, q, k.reps_);
  if (k.reps_.size() * static_cast<std::size_t>(s) > (std::size_t{1} << 26))
    throw InfeasibleError("kernel: canonical table too large");
  k.table_.resize(k.reps_.size() * s);
  for (std::size_t r = 0; r < k.reps_.size(); ++r) {
    double sum = 0.0;
    for (int y = 0; y < s; ++y) {
      const double v = fn(y, k.reps_[r]);
      if (v < 0 || !std::isfinite(v))
        throw ValidationError("kernel arity " + std::to_string(arity) + ": negative entry in row x=" +
                              tuple_str(k.reps_[r]));
      k.table_[r * s + y] = v;
      sum += v;
    }
    if (std::fabs(sum - 1.0) > kRowSumTol)
      throw ValidationError("kernel arity " + std::to_string(arity) + ": row x=" +
                            tuple_str(k.reps_[r]) + " sums to " + std::to_string(sum));
  }
  return k;
}

DiscreteKernel DiscreteKernel::from_table(int arity, int q, int s,
                                          const std::vector<double>& table) {
  if (arity < 0) throw ValidationError("kernel: negative arity");
  if (q < 2) throw ValidationError("kernel: alphabet size must be >= 2");
  if (s < 1) throw ValidationError("kernel: output alphabet must be nonempty");
  if (arity > 20) throw InfeasibleError("kernel: table form limited to arity <= 20");
  std::size_t n_tuples = 1;
  for (int j = 0; j < arity; ++j) n_tuples *= q;
  if (table.size() != n_tuples * s)
    throw ValidationError("kernel arity " + std::to_string(arity) +
                          ": table has wrong size");

  auto flat = [&](int y, std::span<const int> xs) {
    std::size_t idx = 0;
    for (int v : xs) idx = idx * q + v;
    return table[static_cast<std::size_t>(y) * n_tuples + idx];
  };

  // Symmetry: every tuple must agree with its sorted representative.
  // Exhaustive for small arity, random probes otherwise.
  auto check_tuple = [&](std::span<const int> xs) {
    std::vector<int> sorted(xs.begin(), xs.end());
    std::sort(sorted.begin(), sorted.end());
    for (int y = 0; y < s; ++y)
      if (std::fabs(flat(y, xs) - flat(y, sorted)) > kSymmetryTol)
        throw ValidationError("kernel arity " + std::to_string(arity) +
                              ": symmetry violated at y=" + std::to_string(y) +
                              ", x=" + tuple_str(xs) + " vs " + tuple_str(sorted));
  };
  if (arity <= 4) {
    std::vector<int> xs(arity, 0);
    for (std::size_t t = 0; t < n_tuples; ++t) {
      check_tuple(xs);
      for (int j = arity - 1; j >= 0; --j) {
        if (++xs[j] < q) break;
        xs[j] = 0;
      }
    }
  } else {
    Rng rng(0x5ca1ab1eULL);
    for (int probe = 0; probe < 2000; ++probe) {
      std::vector<int> xs(arity);
      for (int& v : xs) v = rng.uniform_int(q);
      check_tuple(xs);
    }
  }

  // Row sums checked on every full tuple.
  {
    std::vector<int> xs(arity, 0);
    for (std::size_t t = 0; t < n_tuples; ++t) {
      double sum = 0.0;
      for (int y = 0; y < s; ++y) {
        const double v = flat(y, xs);
        if (v < 0 || !std::isfinite(v))
          throw ValidationError("kernel arity " + std::to_string(arity) +
                                ": negative entry in row x=" + tuple_str(xs));
        sum += v;
      }
      if (std::fabs(sum - 1.0) > kRowSumTol)
        throw ValidationError("kernel arity " + std::to_string(arity) + ": row x=" +
                              tuple_str(xs) + " sums to " + std::to_string(sum));
      for (int j = arity - 1; j >= 0; --j) {
        if (++xs[j] < q) break;
        xs[j] = 0;
      }
    }
  }

  return from_function(arity, q, s,
                       [&](int y, std::span<const int> xs) { return flat(y, xs); });
}

std::vector<double> DiscreteKernel::dense_table() const {
  if (arity_ > 20) throw InfeasibleError("kernel: dense table too large to materialize");
  std::size_t n_tuples = 1;
  for (int j = 0; j < arity_; ++j) n_tuples *= q_;
  std::vector<double> out(n_tuples * s_);
  std::vector<int> xs(arity_, 0);
  for (std::size_t t = 0; t < n_tuples; ++t) {
    for (int y = 0; y < s_; ++y)
      out[static_cast<std::size_t>(y) * n_tuples + t] = value(y, xs);
    for (int j = arity_ - 1; j >= 0; --j) {
      if (++xs[j] < q_) break;
      xs[j] = 0;
    }
  }
  return out;
}

double softness_constant(const DiscreteKernel& kernel) {
  const auto& reps = kernel.representatives();
  const int s = kernel.s();
  // Symmetry lets the max over tuples run over canonical representatives only.
  std::vector<std::vector<double>> rows;
  rows.reserve(reps.size());
  for (const auto& r : reps) rows.push_back(kernel.row(r));
  double best = 0.0;
  for (const auto& r1 : rows)
    for (const auto& r2 : rows)
      for (const auto& rx : rows) {
        double sum = 0.0;
        for (int y = 0; y < s; ++y) {
          if (r2[y] == 0) {
            if (r1[y] > 0 || rx[y] > 0) return kInf;
            continue;
          }
          sum += r1[y] * rx[y] / r2[y];
        }
        best = std::max(best, sum);
      }
  return best;
}

ObservationModel::ObservationModel(Prior prior, DiscreteKernel r,
                                   std::map<int, DiscreteKernel> q_tables, double theta,
                                   std::string name, bool non_soft_flag)
    : prior_(std::move(prior)),
      r_(std::move(r)),
      q_(std::move(q_tables)),
      theta_(theta),
      name_(std::move(name)),
      non_soft_flag_(non_soft_flag) {
  if (auto err = validate()) throw ValidationError(*err);
}

ObservationModel::ObservationModel(Prior prior, DiscreteKernel r, QGenerator q_family,
                                   int max_arity, double theta, std::string name,
                                   bool non_soft_flag)
    : prior_(std::move(prior)),
      r_(std::move(r)),
      theta_(theta),
      name_(std::move(name)),
      non_soft_flag_(non_soft_flag) {
  for (int k = 0; k <= max_arity; ++k) q_.emplace(k, q_family(k));
  if (auto err = validate()) throw ValidationError(*err);
}

const DiscreteKernel& ObservationModel::Q(int k) const {
  auto it = q_.find(k);
  if (it == q_.end())
    throw ValidationError("model '" + name_ + "': missing kernel for arity " +
                          std::to_string(k));
  return it->second;
}

std::vector<int> ObservationModel::arities() const {
  std::vector<int> out;
  out.reserve(q_.size());
  for (const auto& [k, _] : q_) out.push_back(k);
  return out;
}

double ObservationModel::softness(int max_arity) const {
  double m = softness_constant(r_);
  for (const auto& [k, kern] : q_) {
    if (k < 1 || k > max_arity) continue;
    m = std::max(m, softness_constant(kern));
  }
  return m;
}

ObservationModel ObservationModel::with_theta(double theta) const {
  ObservationModel copy = *this;
  copy.theta_ = theta;
  if (!copy.builtin_desc_.empty()) copy.builtin_desc_["params"]["theta"] = theta;
  if (auto err = copy.validate()) throw ValidationError(*err);
  return copy;
}

std::optional<std::string> ObservationModel::validate() const {
  try {
    prior_.validate();
  } catch (const ValidationError& e) {
    return std::string(e.what());
  }
  if (!(theta_ >= 0.0 && theta_ <= 1.0)) return "model: theta outside [0,1]";
  if (r_.arity() != 1) return "model: R must have arity 1";
  if (r_.q() != prior_.q) return "model: alphabet mismatch between prior and R";
  for (const auto& [k, kern] : q_) {
    if (kern.arity() != k)
      return "model: Q entry " + std::to_string(k) + " has wrong arity";
    if (kern.q() != prior_.q)
      return "model: alphabet mismatch between prior and Q[" + std::to_string(k) + "]";
  }
  return std::nullopt;
}

namespace {

std::vector<double> flatten_nested(const nlohmann::json& arr, int arity, int q, int s,
                                   const std::string& where) {
  if (!arr.is_array() || static_cast<int>(arr.size()) < 1)
    throw ValidationError(where + ": table must be a nonempty array (outputs outermost)");
  if (s >= 1 && static_cast<int>(arr.size()) != s)
    throw ValidationError(where + ": output dimension mismatch");
  std::size_t n_tuples = 1;
  for (int j = 0; j < arity; ++j) n_tuples *= q;
  std::vector<double> flat(arr.size() * n_tuples);
  auto walk = [&](auto&& self, const nlohmann::json& node, int depth, std::size_t base,
                  std::size_t stride) -> void {
    if (depth == arity) {
      if (!node.is_number())
        throw ValidationError(where + ": table leaf is not a number");
      flat[base] = node.get<double>();
      return;
    }
    if (!node.is_array() || static_cast<int>(node.size()) != q)
      throw ValidationError(where + ": inner dimension must have length q");
    for (int v = 0; v < q; ++v)
      self(self, node[v], depth + 1, base + v * (stride / q), stride / q);
  };
  for (std::size_t y = 0; y < arr.size(); ++y)
    walk(walk, arr[y], 0, y * n_tuples, n_tuples);
  return flat;
}

nlohmann::json nest_table(const DiscreteKernel& k) {
  const std::vector<double> dense = k.dense_table();
  std::size_t n_tuples = 1;
  for (int j = 0; j < k.arity(); ++j) n_tuples *= k.q();
  auto build = [&](auto&& self, int depth, std::size_t base, std::size_t stride)
      -> nlohmann::json {
    if (depth == k.arity()) return dense[base];
    nlohmann::json arr = nlohmann::json::array();
    for (int v = 0; v < k.q(); ++v)
      arr.push_back(self(self, depth + 1, base + v * (stride / k.q()), stride / k.q()));
    return arr;
  };
  nlohmann::json out = nlohmann::json::array();
  for (int y = 0; y < k.s(); ++y)
    out.push_back(build(build, 0, static_cast<std::size_t>(y) * n_tuples, n_tuples));
  return out;
}

DiscreteKernel trivial_side_channel(int q) {
  return DiscreteKernel::from_function(1, q, 1, [](int, std::span<const int>) { return 1.0; });
}

DiscreteKernel bsc_kernel(double p, const std::string& where) {
  if (!(p >= 0.0 && p <= 1.0))
    throw ValidationError(where + ": flip probability outside [0,1]");
  return DiscreteKernel::from_function(1, 2, 2, [p](int y, std::span<const int> xs) {
    return y == xs[0] ? 1.0 - p : p;
  });
}

}  // namespace

ObservationModel ObservationModel::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("model: description must be a JSON object");
  if (j.contains("builtin")) {
    if (!j["builtin"].is_string())
      throw ValidationError("model: field 'builtin' must be a string");
    std::map<std::string, double> params;
    if (j.contains("params")) {
      if (!j["params"].is_object())
        throw ValidationError("model: field 'params' must be an object");
      for (const auto& [key, val] : j["params"].items()) {
        if (!val.is_number())
          throw ValidationError("model: params." + key + " must be a number");
        params[key] = val.get<double>();
      }
    }
    return builtin_model(j["builtin"].get<std::string>(), params);
  }
  for (const char* field : {"q", "prior", "theta", "Q"})
    if (!j.contains(field))
      throw ValidationError(std::string("model: missing field '") + field + "'");
  if (!j["q"].is_number_integer()) throw ValidationError("model: field 'q' must be an integer");
  const int q = j["q"].get<int>();
  if (q < 2) throw ValidationError("model: field 'q' must be >= 2");
  if (!j["prior"].is_array() || static_cast<int>(j["prior"].size()) != q)
    throw ValidationError("model: field 'prior' must be an array of length q");
  Prior prior{q, j["prior"].get<std::vector<double>>()};
  if (!j["theta"].is_number()) throw ValidationError("model: field 'theta' must be a number");
  const double theta = j["theta"].get<double>();

  DiscreteKernel r;
  if (j.contains("R") && !j["R"].is_null()) {
    const auto flat = flatten_nested(j["R"], 1, q, -1, "model: R");
    r = DiscreteKernel::from_table(1, q, static_cast<int>(j["R"].size()), flat);
  } else {
    r = trivial_side_channel(q);
  }

  if (!j["Q"].is_object())
    throw ValidationError("model: field 'Q' must map arity -> table");
  std::map<int, DiscreteKernel> qmap;
  if (j["Q"].contains("builtin")) {
    // Kernel family by name with explicit prior / R / theta around it.
    if (!j["Q"]["builtin"].is_string())
      throw ValidationError("model: field 'Q.builtin' must be a string");
    if (q != 2)
      throw ValidationError("model: builtin kernel families require q = 2");
    const std::string fam = j["Q"]["builtin"].get<std::string>();
    double flip = 0.0;
    bool is_or = false;
    const nlohmann::json params =
        j["Q"].contains("params") ? j["Q"]["params"] : nlohmann::json::object();
    if (fam == "group_testing") {
      is_or = true;
      flip = params.value("f", 0.0);
    } else if (fam == "parity_bsc") {
      flip = params.value("p", 0.0);
    } else if (fam == "mod2_storage") {
      flip = 0.0;
    } else {
      throw ValidationError("model: unknown kernel family '" + fam + "'");
    }
    if (!(flip >= 0.0 && flip <= 1.0))
      throw ValidationError("model: Q.params flip probability outside [0,1]");
    for (int k = 0; k <= 64; ++k)
      qmap.emplace(k, DiscreteKernel::from_function(
                          k, 2, 2, [is_or, flip](int y, std::span<const int> xs) {
                            int acc = 0;
                            if (is_or) {
                              for (int v : xs)
                                if (v) {
                                  acc = 1;
                                  break;
                                }
                            } else {
                              for (int v : xs) acc ^= v;
                            }
                            return y == acc ? 1.0 - flip : flip;
                          }));
    bool flagged = !(flip > 0.0 && flip < 1.0);
    for (const auto& rep : r.representatives())
      for (double v : r.row(rep))
        if (v == 0) flagged = true;
    ObservationModel model(std::move(prior), std::move(r), std::move(qmap), theta,
                           "custom", flagged);
    model.q_family_desc_ = nlohmann::json{{"builtin", fam}, {"params", params}};
    return model;
  }
  for (const auto& [key, val] : j["Q"].items()) {
    int k = 0;
    try {
      k = std::stoi(key);
    } catch (...) {
      throw ValidationError("model: Q key '" + key + "' is not an arity");
    }
    if (k < 0) throw ValidationError("model: Q key '" + key + "' is negative");
    const auto flat = flatten_nested(val, k, q, -1, "model: Q[" + key + "]");
    qmap.emplace(k, DiscreteKernel::from_table(k, q, static_cast<int>(val.size()), flat));
  }
  // Table models with any exact zero are non-soft; record it so experiments
  // with a softness hypothesis can refuse early.
  bool flagged = false;
  auto kernel_has_zero = [](const DiscreteKernel& k) {
    for (const auto& rep : k.representatives())
      for (double v : k.row(rep))
        if (v == 0) return true;
    return false;
  };
  if (kernel_has_zero(r)) flagged = true;
  for (const auto& [k, kern] : qmap)
    if (k >= 1 && kernel_has_zero(kern)) flagged = true;
  return ObservationModel(std::move(prior), std::move(r), std::move(qmap), theta, "custom",
                          flagged);
}

nlohmann::json ObservationModel::to_json() const {
  if (!builtin_desc_.empty()) return builtin_desc_;
  nlohmann::json j;
  j["q"] = prior_.q;
  j["prior"] = prior_.probs;
  j["theta"] = theta_;
  j["R"] = nest_table(r_);
  if (!q_family_desc_.empty()) {
    j["Q"] = q_family_desc_;
    return j;
  }
  nlohmann::json qj = nlohmann::json::object();
  for (const auto& [k, kern] : q_) qj[std::to_string(k)] = nest_table(kern);
  j["Q"] = qj;
  return j;
}

std::optional<std::string> validate_model_json(const nlohmann::json& j) {
  try {
    ObservationModel::from_json(j);
  } catch (const Error& e) {
    return std::string(e.what());
  }
  return std::nullopt;
}

ObservationModel builtin_model(const std::string& name,
                               const std::map<std::string, double>& params) {
  static const std::map<std::string, std::vector<std::string>> kAllowed = {
      {"group_testing", {"prior_one", "f", "theta", "r"}},
      {"parity_bsc", {"prior_one", "p", "theta", "r"}},
      {"mod2_storage", {"prior_one", "theta", "r"}},
  };
  auto allowed_it = kAllowed.find(name);
  if (allowed_it == kAllowed.end())
    throw ValidationError("builtin_model: unknown name '" + name + "'");
  for (const auto& [key, _] : params)
    if (std::find(allowed_it->second.begin(), allowed_it->second.end(), key) ==
        allowed_it->second.end())
      throw ValidationError("builtin_model '" + name + "': unknown parameter '" + key + "'");

  auto get = [&](const std::string& key, double fallback) {
    auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
  };
  const double prior_one = get("prior_one", 0.5);
  if (!(prior_one >= 0.0 && prior_one <= 1.0))
    throw ValidationError("builtin_model '" + name + "': prior_one outside [0,1]");
  const double theta = get("theta", 0.0);
  if (!(theta >= 0.0 && theta <= 1.0))
    throw ValidationError("builtin_model '" + name + "': theta outside [0,1]");

  Prior prior{2, {1.0 - prior_one, prior_one}};
  DiscreteKernel r;
  bool r_soft = true;
  if (params.count("r")) {
    const double rr = params.at("r");
    r = bsc_kernel(rr, "builtin_model '" + name + "': r");
    r_soft = rr > 0.0 && rr < 1.0;
  } else {
    r = trivial_side_channel(2);
  }

  double flip = 0.0;
  bool is_or = false;
  if (name == "group_testing") {
    flip = get("f", 0.0);
    if (!(flip >= 0.0 && flip <= 1.0))
      throw ValidationError("builtin_model 'group_testing': f outside [0,1]");
    is_or = true;
  } else if (name == "parity_bsc") {
    flip = get("p", 0.0);
    if (!(flip >= 0.0 && flip <= 1.0))
      throw ValidationError("builtin_model 'parity_bsc': p outside [0,1]");
  } else {  // mod2_storage: noiseless parity, allowed but flagged non-soft
    flip = 0.0;
  }

  const bool q_soft = flip > 0.0 && flip < 1.0;
  auto family = [is_or, flip](int k) {
    return DiscreteKernel::from_function(k, 2, 2, [is_or, flip](int y, std::span<const int> xs) {
      int acc = 0;
      if (is_or) {
        for (int v : xs)
          if (v) {
            acc = 1;
            break;
          }
      } else {
        for (int v : xs) acc ^= v;
      }
      return y == acc ? 1.0 - flip : flip;
    });
  };

  ObservationModel model(std::move(prior), std::move(r), family, kMaxBuiltinArity, theta,
                         name, !(q_soft && r_soft));
  nlohmann::json desc;
  desc["builtin"] = name;
  nlohmann::json pj = nlohmann::json::object();
  for (const auto& [key, val] : params) pj[key] = val;
  pj["theta"] = theta;
  desc["params"] = pj;
  model.builtin_desc_ = desc;
  return model;
}

World sample_world(const FactorGraph& g, const ObservationModel& model, std::uint64_t seed) {
  if (auto err = model.validate()) throw ValidationError(*err);
  World w;
  w.x.resize(g.n());
  w.y.resize(g.m());
  w.z.resize(g.n());
  w.reveal.assign(g.n(), kMasked);

  Rng rx(mix_seed(seed, 1));
  for (int i = 0; i < g.n(); ++i) w.x[i] = rx.categorical(model.prior().probs);

  Rng ry(mix_seed(seed, 2));
  for (int a = 0; a < g.m(); ++a) {
    const auto& nbrs = g.fac_neighbors(a);
    if (nbrs.empty() && !model.has_arity(0)) {
      w.y[a] = 0;  // constant outcome, carries no information
      continue;
    }
    std::vector<int> xs;
    xs.reserve(nbrs.size());
    for (int v : nbrs) xs.push_back(w.x[v]);
    const auto probs = model.Q(static_cast<int>(nbrs.size())).row(xs);
    w.y[a] = ry.categorical(probs);
  }

  Rng rz(mix_seed(seed, 3));
  for (int i = 0; i < g.n(); ++i) {
    const int xi[1] = {w.x[i]};
    w.z[i] = rz.categorical(model.R().row(xi));
  }

  // Dedicated substream for the reveal mask: worlds drawn at different theta
  // from the same seed differ only here (common random numbers).
  Rng ru(mix_seed(seed, 4));
  for (int i = 0; i < g.n(); ++i)
    if (ru.uniform01() < model.theta()) w.reveal[i] = w.x[i];

  return w;
}

void check_world(const FactorGraph& g, const ObservationModel& model, const World& w) {
  const int q = model.prior().q;
  if (static_cast<int>(w.x.size()) != g.n() || static_cast<int>(w.z.size()) != g.n() ||
      static_cast<int>(w.reveal.size()) != g.n() || static_cast<int>(w.y.size()) != g.m())
    throw ValidationError("world: lengths do not match the graph");
  for (int i = 0; i < g.n(); ++i) {
    if (w.x[i] < 0 || w.x[i] >= q) throw ValidationError("world: x out of range");
    if (w.z[i] < 0 || w.z[i] >= model.R().s())
      throw ValidationError("world: z out of range");
    if (w.reveal[i] != kMasked && w.reveal[i] != w.x[i])
      throw ValidationError("world: reveal[i] must be x[i] or masked");
  }
  for (int a = 0; a < g.m(); ++a) {
    const int deg = static_cast<int>(g.fac_neighbors(a).size());
    const int s = (deg == 0 && !model.has_arity(0)) ? 1 : model.Q(deg).s();
    if (w.y[a] < 0 || w.y[a] >= s) throw ValidationError("world: y out of range");
  }
}

World restrict_world(const World& w, const SurgeryResult& surgery) {
  World out;
  out.x.resize(surgery.graph.n());
  out.z.resize(surgery.graph.n());
  out.reveal.resize(surgery.graph.n());
  out.y.resize(surgery.graph.m());
  for (std::size_t i = 0; i < surgery.var_map.size(); ++i) {
    const int ni = surgery.var_map[i];
    if (ni < 0) continue;
    out.x[ni] = w.x[i];
    out.z[ni] = w.z[i];
    out.reveal[ni] = w.reveal[i];
  }
  for (std::size_t a = 0; a < surgery.fac_map.size(); ++a) {
    const int na = surgery.fac_map[a];
    if (na < 0) continue;
    out.y[na] = w.y[a];
  }
  return out;
}

Marginal local_evidence(const ObservationModel& model, int z, int reveal) {
  const int q = model.prior().q;
  Marginal e(q);
  for (int xi = 0; xi < q; ++xi) {
    const int in[1] = {xi};
    e[xi] = model.prior().probs[xi] * model.R().value(z, in);
    if (reveal != kMasked && reveal != xi) e[xi] = 0.0;
  }
  if (normalize(e) <= 0)
    throw ZeroNormalizerError("local evidence has zero mass", -1, -1);
  return e;
}

nlohmann::json world_to_json(const World& w) {
  nlohmann::json j;
  j["x"] = w.x;
  j["y"] = w.y;
  j["z"] = w.z;
  j["reveal"] = w.reveal;
  return j;
}

World world_from_json(const nlohmann::json& j) {
  for (const char* field : {"x", "y", "z", "reveal"})
    if (!j.contains(field) || !j[field].is_array())
      throw ValidationError(std::string("world: missing array field '") + field + "'");
  World w;
  w.x = j["x"].get<std::vector<int>>();
  w.y = j["y"].get<std::vector<int>>();
  w.z = j["z"].get<std::vector<int>>();
  w.reveal = j["reveal"].get<std::vector<int>>();
  return w;
}

}  // namespace sparseobs
