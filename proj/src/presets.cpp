#include <cstdio>

#include "nested_iv/errors.hpp"
#include "nested_iv/simulation.hpp"

namespace niv {

namespace {

const int kSizes[] = {100, 500, 1000};
const double kProportions[] = {0.3, 0.5, 0.7};
const double kEffects[] = {0.0, 0.25, 0.5, 1.0};

std::string label(const char* table, int I, double p, double mu) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "%s I=%d p=%.2f mu=%.2f", table, I, p, mu);
  return buf;
}

std::vector<ExperimentConfig> factorial(const char* table, Focal focal, EffectDist dist, int reps) {
  std::vector<ExperimentConfig> out;
  for (int I : kSizes)
    for (double p : kProportions)
      for (double mu : kEffects) {
        ExperimentConfig e;
        e.label = label(table, I, p, mu);
        e.dgp.n_strata = I;
        e.dgp.p_focal = p;
        e.dgp.focal = focal;
        e.dgp.effect_dist = dist;
        e.dgp.mu = mu;
        e.target = focal == Focal::Switchers ? Target::SW : Target::ACO;
        e.reps = reps;
        out.push_back(e);
      }
  return out;
}

std::vector<ExperimentConfig> two_switchers(int reps) {
  std::vector<ExperimentConfig> out;
  for (int I : kSizes)
    for (double mu : kEffects) {
      ExperimentConfig e;
      char buf[64];
      std::snprintf(buf, sizeof buf, "tableS4 I=%d mu=%.2f", I, mu);
      e.label = buf;
      e.dgp.n_strata = I;
      e.dgp.p_focal = 0.5;
      e.dgp.mu = mu;
      e.dgp.layout = Layout::TwoSwitchersPerStratum;
      e.reps = reps;
      out.push_back(e);
    }
  return out;
}

std::vector<ExperimentConfig> biased(int reps) {
  std::vector<ExperimentConfig> out;
  struct Panel {
    const char* name;
    Scheme scheme;
    bool fixed_pairs;
  };
  const Panel panels[] = {{"A-I", Scheme::BiasedSubmodelI, false},
                          {"A-II", Scheme::BiasedSubmodelII, false},
                          {"B", Scheme::BiasedSubmodelII, true}};
  for (const auto& panel : panels)
    for (int I : kSizes)
      for (int step = 1; step <= 10; ++step) {
        ExperimentConfig e;
        double gamma = 1.0 + 0.1 * step;
        char buf[128];
        std::snprintf(buf, sizeof buf, "tableS8 panel=%s I=%d gamma=%.1f", panel.name, I, gamma);
        e.label = buf;
        e.dgp.n_strata = I;
        e.dgp.p_focal = 0.5;
        e.dgp.mu = 0.0;
        if (panel.fixed_pairs) {
          e.dgp.layout = Layout::SwitcherAcoPairs;
          e.dgp.baseline_sd = 0.1;
          e.dgp.constant_effects = true;
        }
        e.assign.scheme = panel.scheme;
        e.assign.gamma = gamma;
        e.sensitivity = true;
        e.reps = reps;
        out.push_back(e);
      }
  return out;
}

}  // namespace

std::vector<std::string> preset_names() {
  return {"table2", "tableS2", "tableS3", "tableS4", "tableS5-7", "tableS8"};
}

std::vector<ExperimentConfig> preset(const std::string& name, int reps) {
  if (reps < 1) fail(ErrorCode::InvalidConfig, "reps must be >= 1");
  if (name == "table2") return factorial("table2", Focal::Switchers, EffectDist::Normal, reps);
  if (name == "tableS2") return factorial("tableS2", Focal::Switchers, EffectDist::Uniform, reps);
  if (name == "tableS3") return factorial("tableS3", Focal::Switchers, EffectDist::Exponential, reps);
  if (name == "tableS4") return two_switchers(reps);
  if (name == "tableS5-7") {
    std::vector<ExperimentConfig> out;
    const std::pair<const char*, EffectDist> tables[] = {{"tableS5", EffectDist::Normal},
                                                         {"tableS6", EffectDist::Uniform},
                                                         {"tableS7", EffectDist::Exponential}};
    for (const auto& [t, dist] : tables) {
      auto part = factorial(t, Focal::AlwaysCompliers, dist, reps);
      out.insert(out.end(), part.begin(), part.end());
    }
    return out;
  }
  if (name == "tableS8") return biased(reps);
  fail(ErrorCode::InvalidConfig, "unknown preset '" + name + "'");
}

}  // namespace niv
