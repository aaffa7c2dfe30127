#include "nested_iv/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <random>
#include <thread>

#include "nested_iv/errors.hpp"
#include "nested_iv/rng.hpp"
#include "nested_iv/sensitivity.hpp"

namespace niv {

namespace {

constexpr std::uint64_t kCohortDomain = 1;
constexpr std::uint64_t kAssignDomain = 2;
const double kNaN = std::numeric_limits<double>::quiet_NaN();

const std::array<PrincipalKind, 5> kOthersOfSw = {PrincipalKind::ACO, PrincipalKind::AT_NT,
                                                  PrincipalKind::AAT, PrincipalKind::NT_AT,
                                                  PrincipalKind::ANT};
const std::array<PrincipalKind, 5> kOthersOfAco = {PrincipalKind::SW, PrincipalKind::AT_NT,
                                                   PrincipalKind::AAT, PrincipalKind::NT_AT,
                                                   PrincipalKind::ANT};

double draw_normal(Rng& rng, double mean, double sd) {
  std::normal_distribution<double> n(mean, sd);
  return n(rng);
}

double draw_effect(PrincipalKind kind, const DgpConfig& cfg, Rng& rng) {
  PrincipalKind focal = cfg.focal == Focal::Switchers ? PrincipalKind::SW : PrincipalKind::ACO;
  PrincipalKind partner = cfg.focal == Focal::Switchers ? PrincipalKind::ACO : PrincipalKind::SW;
  if (kind == focal) {
    if (cfg.constant_effects) return cfg.mu;
    switch (cfg.effect_dist) {
      case EffectDist::Uniform: {
        std::uniform_real_distribution<double> u(cfg.mu - std::sqrt(3.0), cfg.mu + std::sqrt(3.0));
        return u(rng);
      }
      case EffectDist::Normal: return draw_normal(rng, cfg.mu, 1.0);
      case EffectDist::Exponential: {
        if (cfg.mu == 0) return 0.0;
        std::exponential_distribution<double> e(1.0 / cfg.mu);
        return e(rng);
      }
    }
  }
  double mean = kind == partner ? cfg.partner_mean : cfg.other_mean;
  if (cfg.constant_effects) return mean;
  return draw_normal(rng, mean, cfg.background_sd);
}

LatentUnit draw_unit(PrincipalKind kind, const DgpConfig& cfg, Rng& rng, double fixed_effect = kNaN) {
  SwitcherOrigin origin = SwitcherOrigin::None;
  // Half of the switchers are never-takers under the weaker IV, half always-takers.
  if (kind == PrincipalKind::SW) origin = rng.below(2) ? SwitcherOrigin::FromAT : SwitcherOrigin::FromNT;
  double r0 = draw_normal(rng, 0.0, cfg.baseline_sd);
  double tau = std::isnan(fixed_effect) ? draw_effect(kind, cfg, rng) : fixed_effect;
  return make_latent(kind, origin, r0, r0 + tau);
}

}  // namespace

const char* to_string(Focal f) { return f == Focal::Switchers ? "SW" : "ACO"; }

const char* to_string(EffectDist e) {
  switch (e) {
    case EffectDist::Uniform: return "uniform";
    case EffectDist::Normal: return "normal";
    case EffectDist::Exponential: return "exponential";
  }
  return "?";
}

const char* to_string(Layout l) {
  switch (l) {
    case Layout::Multinomial: return "multinomial";
    case Layout::TwoSwitchersPerStratum: return "two-switchers";
    case Layout::SwitcherAcoPairs: return "sw-aco-pairs";
  }
  return "?";
}

const char* to_string(Scheme s) {
  switch (s) {
    case Scheme::Uniform: return "uniform";
    case Scheme::BiasedSubmodelI: return "submodel-I";
    case Scheme::BiasedSubmodelII: return "submodel-II";
  }
  return "?";
}

void DgpConfig::validate() const {
  if (n_strata < 1) fail(ErrorCode::InvalidConfig, "n_strata must be positive");
  if (!(p_focal >= 0 && p_focal <= 1)) fail(ErrorCode::InvalidConfig, "p_focal must lie in [0,1]");
  if (effect_dist == EffectDist::Exponential && mu < 0)
    fail(ErrorCode::InvalidConfig, "exponential effects need mu >= 0");
  if (!(baseline_sd >= 0) || !(background_sd >= 0))
    fail(ErrorCode::InvalidConfig, "standard deviations must be non-negative");
  if (layout != Layout::Multinomial && focal != Focal::Switchers)
    fail(ErrorCode::InvalidConfig, "fixed layouts are defined with switchers as the focal stratum");
}

SimulatedCohort sample_cohort(const DgpConfig& cfg, std::uint64_t replicate) {
  cfg.validate();
  SimulatedCohort cohort;
  cohort.strata.resize(cfg.n_strata);
  const auto& others = cfg.focal == Focal::Switchers ? kOthersOfSw : kOthersOfAco;
  PrincipalKind focal = cfg.focal == Focal::Switchers ? PrincipalKind::SW : PrincipalKind::ACO;

  for (int i = 0; i < cfg.n_strata; ++i) {
    Rng rng = make_stream(cfg.seed, kCohortDomain, replicate, static_cast<std::uint64_t>(i));
    auto& s = cohort.strata[i];
    switch (cfg.layout) {
      case Layout::Multinomial:
        for (auto& u : s) {
          double x = rng.uniform();
          PrincipalKind kind;
          if (x < cfg.p_focal) {
            kind = focal;
          } else {
            auto k = static_cast<size_t>((x - cfg.p_focal) / ((1 - cfg.p_focal) / 5));
            kind = others[std::min<size_t>(k, 4)];
          }
          u = draw_unit(kind, cfg, rng);
        }
        break;
      case Layout::TwoSwitchersPerStratum: {
        static const int kPairs[6][2] = {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}};
        const int* sw = kPairs[rng.below(6)];
        for (int p = 0; p < 4; ++p) {
          if (p == sw[0] || p == sw[1])
            s[p] = draw_unit(PrincipalKind::SW, cfg, rng, cfg.mu);
          else
            s[p] = draw_unit(kOthersOfSw[rng.below(5)], cfg, rng);
        }
        break;
      }
      case Layout::SwitcherAcoPairs: {
        int sw_pair = static_cast<int>(rng.below(2));
        for (int p = 0; p < 4; ++p)
          s[p] = draw_unit(p / 2 == sw_pair ? PrincipalKind::SW : PrincipalKind::ACO, cfg, rng);
        break;
      }
    }
  }
  return cohort;
}

const std::array<std::array<IvLevel, 4>, 8>& omega() {
  static const std::array<std::array<IvLevel, 4>, 8> table = {{
      {kTreatedA, kControlA, kTreatedB, kControlB},
      {kControlA, kTreatedA, kTreatedB, kControlB},
      {kTreatedA, kControlA, kControlB, kTreatedB},
      {kControlA, kTreatedA, kControlB, kTreatedB},
      {kTreatedB, kControlB, kTreatedA, kControlA},
      {kTreatedB, kControlB, kControlA, kTreatedA},
      {kControlB, kTreatedB, kTreatedA, kControlA},
      {kControlB, kTreatedB, kControlA, kTreatedA},
  }};
  return table;
}

namespace {

int config_index(const std::array<IvLevel, 4>& z) {
  const auto& tab = omega();
  for (int c = 0; c < 8; ++c)
    if (tab[c] == z) return c;
  fail(ErrorCode::Internal, "assignment outside the configuration set");
}

double transformed(const LatentUnit& u, IvLevel z, double theta) {
  return u.r_at(z) - theta * u.d_at(z);
}

}  // namespace

std::vector<int> draw_assignment(const SimulatedCohort& cohort, const AssignmentConfig& acfg,
                                 std::uint64_t seed, std::uint64_t replicate) {
  if (acfg.scheme != Scheme::Uniform && !(acfg.gamma >= 1))
    fail(ErrorCode::GammaBelowOne, "gamma must be >= 1");
  std::vector<int> configs(cohort.strata.size());
  const double pi_max = acfg.gamma / (acfg.gamma + 1);
  for (size_t i = 0; i < cohort.strata.size(); ++i) {
    Rng rng = make_stream(seed, kAssignDomain, replicate, i);
    if (acfg.scheme == Scheme::Uniform) {
      configs[i] = static_cast<int>(rng.below(8));
      continue;
    }
    const auto& s = cohort.strata[i];
    // Step 1: within-pair orientation, treated slot of each pair.
    int treated_slot[2] = {static_cast<int>(rng.below(2)), static_cast<int>(rng.below(2))};
    auto contrast = [&](int pair, Group g) {
      const auto& t = s[2 * pair + treated_slot[pair]];
      const auto& c = s[2 * pair + 1 - treated_slot[pair]];
      IvLevel zt{g, Arm::Treated}, zc{g, Arm::Control};
      return transformed(t, zt, acfg.criterion_theta) - transformed(c, zc, acfg.criterion_theta);
    };
    double first_b = contrast(0, Group::B) - contrast(1, Group::A);
    double second_b = contrast(1, Group::B) - contrast(0, Group::A);
    // Step 2: the stronger IV pair goes to the favoured pair with probability pi_i.
    double pi = pi_max;
    if (acfg.scheme == Scheme::BiasedSubmodelI) pi = 0.5 + rng.uniform() * (pi_max - 0.5);
    bool follow = rng.uniform() < pi;
    int favoured = first_b > second_b ? 0 : 1;
    int b_pair = follow ? favoured : 1 - favoured;

    std::array<IvLevel, 4> z;
    for (int j = 0; j < 2; ++j) {
      Group g = j == b_pair ? Group::B : Group::A;
      for (int k = 0; k < 2; ++k) z[2 * j + k] = IvLevel{g, k == treated_slot[j] ? Arm::Treated : Arm::Control};
    }
    configs[i] = config_index(z);
  }
  return configs;
}

StratumObs observe_stratum(const LatentStratum& s, int config) {
  const auto& z = omega()[config];
  StratumObs o;
  for (int p = 0; p < 4; ++p) {
    double d = s[p].d_at(z[p]), r = s[p].r_at(z[p]);
    switch (arm_index(z[p])) {
      case 0: o.r_ta = r; o.d_ta = d; break;
      case 1: o.r_ca = r; o.d_ca = d; break;
      case 2: o.r_tb = r; o.d_tb = d; break;
      case 3: o.r_cb = r; o.d_cb = d; break;
    }
  }
  return o;
}

std::vector<StratumObs> observe_cohort(const SimulatedCohort& cohort, const std::vector<int>& configs) {
  std::vector<StratumObs> out(cohort.strata.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = observe_stratum(cohort.strata[i], configs[i]);
  return out;
}

PopNivDesign to_design(const SimulatedCohort& cohort, const std::vector<int>& configs) {
  PopNivDesign design;
  design.provenance.distance = "simulated";
  for (size_t i = 0; i < cohort.strata.size(); ++i) {
    const auto& z = omega()[configs[i]];
    MatchedStratum m;
    m.stratum_id = static_cast<int>(i);
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k) {
        int p = 2 * j + k;
        auto& u = m.units[j][k];
        u.unit_id = "s" + std::to_string(i + 1) + "_" + std::to_string(j + 1) + std::to_string(k + 1);
        u.z = z[p];
        u.d = cohort.strata[i][p].d_at(z[p]);
        u.r = cohort.strata[i][p].r_at(z[p]);
      }
    design.strata.push_back(std::move(m));
  }
  return design;
}

PopNivDesign assign_and_observe(const SimulatedCohort& cohort, const AssignmentConfig& acfg,
                                std::uint64_t seed, std::uint64_t replicate) {
  return to_design(cohort, draw_assignment(cohort, acfg, seed, replicate));
}

double true_iota(const SimulatedCohort& cohort, Group g) {
  double sum = 0;
  size_t n = 0;
  for (const auto& s : cohort.strata)
    for (const auto& u : s) {
      sum += u.d_at({g, Arm::Treated}) - u.d_at({g, Arm::Control});
      ++n;
    }
  return n ? sum / static_cast<double>(n) : kNaN;
}

double true_effect_ratio(const SimulatedCohort& cohort, Target which) {
  double num = 0, den = 0;
  for (const auto& s : cohort.strata)
    for (const auto& u : s) {
      double ra = u.r_at(kTreatedA) - u.r_at(kControlA);
      double da = u.d_at(kTreatedA) - u.d_at(kControlA);
      if (which == Target::ACO) {
        num += ra;
        den += da;
      } else {
        num += (u.r_at(kTreatedB) - u.r_at(kControlB)) - ra;
        den += (u.d_at(kTreatedB) - u.d_at(kControlB)) - da;
      }
    }
  return den == 0 ? kNaN : num / den;
}

double stratum_sate(const SimulatedCohort& cohort, PrincipalKind kind) {
  double sum = 0;
  int n = 0;
  for (const auto& s : cohort.strata)
    for (const auto& u : s)
      if (u.kind == kind) {
        sum += u.r1 - u.r0;
        ++n;
      }
  return n ? sum / n : kNaN;
}

double mc_se(double rate, int n) { return n > 0 ? std::sqrt(rate * (1 - rate) / n) : 0.0; }

namespace {

struct Record {
  bool degenerate = true;
  double iota_a = 0, iota_b = 0, theta = 0;
  bool rej_level = false, rej_power = false, rej_greater = false, rej_sens = false,
       rej_sens_greater = false;
  bool bounded = false, covered = false;
  double length = 0;
  double t = 0, s = 0, t0 = 0, s0 = 0;
};

Record one_replicate(const ExperimentConfig& cfg, int rep) {
  Record r;
  auto cohort = sample_cohort(cfg.dgp, static_cast<std::uint64_t>(rep));
  auto configs = draw_assignment(cohort, cfg.assign, cfg.dgp.seed, static_cast<std::uint64_t>(rep));
  auto obs = observe_cohort(cohort, configs);
  r.iota_a = true_iota(cohort, Group::A);
  r.iota_b = true_iota(cohort, Group::B);
  r.theta = true_effect_ratio(cohort, cfg.target);
  if (std::isnan(r.theta)) return r;

  auto at_truth = test_effect(obs, cfg.target, r.theta, Alternative::TwoSided);
  auto at_zero = test_effect(obs, cfg.target, 0.0, Alternative::TwoSided);
  Estimate ci;
  try {
    ci = invert_ci(obs, cfg.target, cfg.level);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::UndefinedEstimand) throw;
    return r;
  }
  r.degenerate = false;
  r.rej_level = rejects(at_truth, cfg.level);
  r.rej_power = rejects(at_zero, cfg.level);
  auto greater = at_truth;
  greater.alternative = Alternative::Greater;
  r.rej_greater = rejects(greater, cfg.level);
  if (cfg.sensitivity) {
    r.rej_sens = sensitivity_test(obs, cfg.target, r.theta, cfg.assign.gamma, Alternative::TwoSided,
                                  cfg.level)
                     .reject;
    r.rej_sens_greater = sensitivity_test(obs, cfg.target, r.theta, cfg.assign.gamma,
                                          Alternative::Greater, cfg.level)
                             .reject;
  }
  r.bounded = ci.ci.shape == CiShape::Bounded;
  r.length = r.bounded ? ci.ci.length() : 0.0;
  r.covered = ci.ci.contains(r.theta);
  r.t = at_truth.statistic;
  r.s = at_truth.se;
  r.t0 = at_zero.statistic;
  r.s0 = at_zero.se;
  return r;
}

double sample_sd(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  double m = 0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double ss = 0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

ReplicateMetrics run_experiment(const ExperimentConfig& cfg, int threads) {
  if (cfg.reps < 1) fail(ErrorCode::InvalidConfig, "reps must be >= 1");
  cfg.dgp.validate();
  if (!(cfg.level > 0 && cfg.level < 1)) fail(ErrorCode::InvalidConfig, "level must lie in (0,1)");
  int n_threads = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
  n_threads = std::max(1, std::min(n_threads, cfg.reps));

  std::vector<Record> recs(cfg.reps);
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  auto worker = [&]() {
    try {
      for (int rep = next++; rep < cfg.reps && !failed; rep = next++) recs[rep] = one_replicate(cfg, rep);
    } catch (...) {
      if (!failed.exchange(true)) error = std::current_exception();
    }
  };
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (error) std::rethrow_exception(error);

  // Aggregated in replicate order, so the thread schedule cannot change the result.
  ReplicateMetrics m;
  m.reps = cfg.reps;
  std::vector<double> ts, t0s;
  double len_sum = 0, s_sum = 0, s0_sum = 0;
  int bounded = 0;
  for (const auto& r : recs) {
    if (r.degenerate) {
      ++m.degenerate;
      continue;
    }
    ++m.used;
    m.level += r.rej_level;
    m.power += r.rej_power;
    m.level_greater += r.rej_greater;
    m.sensitivity_level += r.rej_sens;
    m.sensitivity_greater += r.rej_sens_greater;
    m.coverage += r.covered;
    m.iota_a_bar += r.iota_a;
    m.iota_b_bar += r.iota_b;
    m.theta_true_bar += r.theta;
    if (r.bounded) {
      len_sum += r.length;
      ++bounded;
    } else {
      ++m.unbounded_ci;
    }
    ts.push_back(r.t);
    t0s.push_back(r.t0);
    s_sum += r.s;
    s0_sum += r.s0;
  }
  if (m.used > 0) {
    double n = m.used;
    m.level /= n;
    m.power /= n;
    m.level_greater /= n;
    m.sensitivity_level /= n;
    m.sensitivity_greater /= n;
    m.coverage = 100.0 * m.coverage / n;
    m.iota_a_bar /= n;
    m.iota_b_bar /= n;
    m.theta_true_bar /= n;
    m.mean_S = s_sum / n;
    m.mean_S0 = s0_sum / n;
    m.sd_T = sample_sd(ts);
    m.sd_T0 = sample_sd(t0s);
  }
  m.ci_length_mean = bounded ? len_sum / bounded : kNaN;
  return m;
}

}  // namespace niv
