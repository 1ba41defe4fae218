#include "glip/config.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

namespace glip {

namespace {

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known,
                    const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known.count(it.key()))
      throw std::invalid_argument("config: unknown key '" + it.key() + "' in " + where);
  }
}

GammaRule parse_gamma_rule(const nlohmann::json& j) {
  reject_unknown(j, {"kind", "gamma"}, "gamma_rule");
  GammaRule rule;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "constant") {
    rule.kind = GammaRuleKind::Constant;
    rule.constant = j.value("gamma", 1.0);
  } else if (kind == "ill_posed_schedule") {
    rule.kind = GammaRuleKind::IllPosedSchedule;
  } else if (kind == "spectral_schedule") {
    rule.kind = GammaRuleKind::SpectralSchedule;
  } else {
    throw std::invalid_argument("config: unknown gamma_rule kind '" + kind + "'");
  }
  return rule;
}

}  // namespace

CliConfig CliConfig::parse(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("config: top level must be an object");
  reject_unknown(j,
                 {"scenario", "tau_grid", "gamma_rule", "replicates", "inner_draws",
                  "seed", "p", "n", "alpha", "beta", "kappa", "sampler", "timings",
                  "operator", "prior", "sigma2", "lambda", "x_true"},
                 "top level");

  CliConfig c;
  c.scenario.name = scenario_name_from(j.at("scenario").get<std::string>());
  if (!j.contains("tau_grid") || !j.at("tau_grid").is_array() || j.at("tau_grid").empty())
    throw std::invalid_argument("config: tau_grid must be a nonempty array");
  for (const auto& t : j.at("tau_grid"))
    c.scenario.tau_grid.push_back(t.get<double>());

  if (j.contains("gamma_rule")) {
    c.scenario.gamma_rule = parse_gamma_rule(j.at("gamma_rule"));
  } else {
    c.scenario.gamma_rule = default_gamma_rule(c.scenario.name);
  }

  c.scenario.replicates = j.value("replicates", 200);
  c.scenario.inner_draws = j.value("inner_draws", 2000);
  if (j.contains("seed")) {
    c.scenario.master_seed = j.at("seed").get<std::uint64_t>();
    c.seed_from_config = true;
  }
  c.scenario.p = j.value("p", 0);
  c.scenario.n = j.value("n", 0);
  c.scenario.alpha = j.value("alpha", 1.0);
  c.scenario.beta = j.value("beta", 2.0);
  c.scenario.kappa = j.value("kappa", 2.0);
  c.scenario.timings = j.value("timings", false);

  if (j.contains("sampler")) {
    const auto& s = j.at("sampler");
    reject_unknown(s, {"burn_in", "thin", "target_accept"}, "sampler");
    c.scenario.sampler.burn_in = s.value("burn_in", -1);
    c.scenario.sampler.thin = s.value("thin", -1);
    c.scenario.sampler.target_accept = s.value("target_accept", 0.3);
  }

  for (const char* key : {"operator", "prior", "sigma2", "lambda", "x_true"}) {
    if (j.contains(key)) c.overrides[key] = j.at(key);
  }
  if (c.overrides.contains("prior"))
    reject_unknown(c.overrides.at("prior"), {"kind", "precision", "mean", "kappa", "gamma"},
                   "prior");
  c.scenario.validate();
  return c;
}

CliConfig CliConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("config: invalid JSON in '" + path + "': " + e.what());
  }
  return parse(j);
}

nlohmann::json CliConfig::normalized() const {
  nlohmann::json j;
  j["scenario"] = scenario_name_str(scenario.name);
  j["tau_grid"] = scenario.tau_grid;
  nlohmann::json gr;
  switch (scenario.gamma_rule.kind) {
    case GammaRuleKind::Constant:
      gr["kind"] = "constant";
      gr["gamma"] = scenario.gamma_rule.constant;
      break;
    case GammaRuleKind::IllPosedSchedule:
      gr["kind"] = "ill_posed_schedule";
      break;
    case GammaRuleKind::SpectralSchedule:
      gr["kind"] = "spectral_schedule";
      break;
  }
  j["gamma_rule"] = gr;
  j["replicates"] = scenario.replicates;
  j["inner_draws"] = scenario.inner_draws;
  j["seed"] = scenario.master_seed;
  j["p"] = scenario.p;
  j["n"] = scenario.n;
  j["alpha"] = scenario.alpha;
  j["beta"] = scenario.beta;
  j["kappa"] = scenario.kappa;
  j["timings"] = scenario.timings;
  nlohmann::json s;
  s["burn_in"] = scenario.sampler.burn_in;
  s["thin"] = scenario.sampler.thin;
  s["target_accept"] = scenario.sampler.target_accept;
  j["sampler"] = s;
  for (auto it = overrides.begin(); it != overrides.end(); ++it) j[it.key()] = it.value();
  return j;
}

}  // namespace glip
