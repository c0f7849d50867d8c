#include "ctsense/scenario_io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace ctsense {

namespace {

using nlohmann::json;

std::string join(const std::string& path, std::string_view key) { return path + "/" + std::string(key); }
std::string join(const std::string& path, std::size_t index) { return path + "/" + std::to_string(index); }

const json& require(const json& obj, const std::string& path, std::string_view key) {
  const auto it = obj.find(std::string(key));
  if (it == obj.end()) throw ScenarioError(join(path, key), "missing key");
  return *it;
}

void require_object(const json& node, const std::string& path) {
  if (!node.is_object()) throw ScenarioError(path.empty() ? "/" : path, "expected an object");
}

void reject_unknown(const json& obj, const std::string& path, std::initializer_list<std::string_view> known) {
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (std::string_view k : known) ok = ok || key == k;
    if (!ok) throw ScenarioError(join(path, key), "unknown key");
  }
}

double get_number(const json& node, const std::string& path) {
  if (!node.is_number()) throw ScenarioError(path, "expected a number");
  const double v = node.get<double>();
  if (!std::isfinite(v)) throw ScenarioError(path, "expected a finite number");
  return v;
}

std::vector<double> get_numbers(const json& node, const std::string& path, std::size_t size) {
  if (!node.is_array()) throw ScenarioError(path, "expected an array of numbers");
  if (node.size() != size) {
    throw ScenarioError(path, "expected " + std::to_string(size) + " entries, got " + std::to_string(node.size()));
  }
  std::vector<double> out;
  out.reserve(size);
  for (std::size_t i = 0; i < node.size(); ++i) out.push_back(get_number(node[i], join(path, i)));
  return out;
}

std::size_t get_index(const json& node, const std::string& path, std::size_t controls) {
  if (!node.is_number_integer()) throw ScenarioError(path, "expected a 1-based control index");
  const auto v = node.get<long long>();
  if (v < 1 || static_cast<std::size_t>(v) > controls) {
    throw ScenarioError(path, "control index must lie in 1.." + std::to_string(controls));
  }
  return static_cast<std::size_t>(v - 1);
}

std::string get_string(const json& node, const std::string& path) {
  if (!node.is_string()) throw ScenarioError(path, "expected a string");
  return node.get<std::string>();
}

struct ParsedControl {
  ExpFamilyModel model;
  std::optional<double> mean;
};

ParsedControl parse_control(const json& node, const std::string& path) {
  require_object(node, path);
  reject_unknown(node, path, {"family", "sigma", "mean"});
  const std::string name = get_string(require(node, path, "family"), join(path, "family"));
  Family family;
  try {
    family = family_from_string(name);
  } catch (const std::exception&) {
    throw ScenarioError(join(path, "family"), "unknown family '" + name + "'");
  }
  std::optional<ExpFamilyModel> model;
  if (family == Family::Gaussian) {
    const double sigma = get_number(require(node, path, "sigma"), join(path, "sigma"));
    if (!(sigma > 0.0)) throw ScenarioError(join(path, "sigma"), "sigma must be positive");
    model = ExpFamilyModel::gaussian(sigma);
  } else {
    if (node.contains("sigma")) throw ScenarioError(join(path, "sigma"), "only gaussian controls take sigma");
    switch (family) {
      case Family::Bernoulli: model = ExpFamilyModel::bernoulli(); break;
      case Family::Poisson: model = ExpFamilyModel::poisson(); break;
      default: model = ExpFamilyModel::exponential(); break;
    }
  }
  std::optional<double> mean;
  if (node.contains("mean")) mean = get_number(node["mean"], join(path, "mean"));
  return {*model, mean};
}

double natural_from_observation_mean(const ExpFamilyModel& model, double mean, const std::string& path) {
  const double kappa = model.family() == Family::Gaussian ? mean / model.sigma() : mean;
  if (!model.mean_image().contains(kappa)) throw ScenarioError(path, "mean outside the family's range");
  return model.natural_from_mean(kappa);
}

void parse_cell(const json& node, const std::string& path, std::size_t controls, HypothesisSet& out) {
  require_object(node, path);
  const std::string type = get_string(require(node, path, "type"), join(path, "type"));
  if (type == "box") {
    reject_unknown(node, path, {"type", "lo", "hi"});
    BoxCell box{get_numbers(require(node, path, "lo"), join(path, "lo"), controls),
                get_numbers(require(node, path, "hi"), join(path, "hi"), controls)};
    out.emplace_back(std::move(box));
  } else if (type == "anomaly") {
    reject_unknown(node, path, {"type", "stream", "side"});
    const std::size_t stream = get_index(require(node, path, "stream"), join(path, "stream"), controls);
    const std::string side = node.contains("side") ? get_string(node["side"], join(path, "side")) : "both";
    if (side == "above" || side == "both") out.emplace_back(AnomalyCell{stream, AnomalySide::Above});
    if (side == "below" || side == "both") out.emplace_back(AnomalyCell{stream, AnomalySide::Below});
    if (side != "above" && side != "below" && side != "both") {
      throw ScenarioError(join(path, "side"), "side must be above, below or both");
    }
  } else if (type == "order") {
    reject_unknown(node, path, {"type", "top"});
    const json& top = require(node, path, "top");
    const std::string top_path = join(path, "top");
    if (!top.is_array()) throw ScenarioError(top_path, "expected an array of control indices");
    OrderCell cell;
    for (std::size_t i = 0; i < top.size(); ++i) cell.top.push_back(get_index(top[i], join(top_path, i), controls));
    out.emplace_back(std::move(cell));
  } else {
    throw ScenarioError(join(path, "type"), "unknown cell type '" + type + "'");
  }
}

json cell_to_json(const ConvexCell& cell) {
  if (const auto* box = std::get_if<BoxCell>(&cell)) return {{"type", "box"}, {"lo", box->lo}, {"hi", box->hi}};
  if (const auto* anomaly = std::get_if<AnomalyCell>(&cell)) {
    return {{"type", "anomaly"},
            {"stream", anomaly->stream + 1},
            {"side", anomaly->side == AnomalySide::Above ? "above" : "below"}};
  }
  const auto& order = std::get<OrderCell>(cell);
  json top = json::array();
  for (std::size_t t : order.top) top.push_back(t + 1);
  return {{"type", "order"}, {"top", top}};
}

}  // namespace

Scenario parse_scenario(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ScenarioError("parse", e.what());
  }
  require_object(doc, "");
  reject_unknown(doc, "", {"name", "controls", "hypotheses", "truth"});

  std::string name = doc.contains("name") ? get_string(doc["name"], "/name") : "";

  const json& controls = require(doc, "", "controls");
  if (!controls.is_array() || controls.empty()) throw ScenarioError("/controls", "expected a non-empty array");
  std::vector<ExpFamilyModel> models;
  std::vector<std::optional<double>> means;
  for (std::size_t u = 0; u < controls.size(); ++u) {
    ParsedControl c = parse_control(controls[u], join("/controls", u));
    models.push_back(c.model);
    means.push_back(c.mean);
  }
  const std::size_t dim = models.size();

  const json& hypotheses = require(doc, "", "hypotheses");
  if (!hypotheses.is_array()) throw ScenarioError("/hypotheses", "expected an array");
  std::vector<HypothesisSet> sets;
  for (std::size_t m = 0; m < hypotheses.size(); ++m) {
    const std::string path = join("/hypotheses", m);
    require_object(hypotheses[m], path);
    reject_unknown(hypotheses[m], path, {"cells"});
    const json& cells = require(hypotheses[m], path, "cells");
    if (!cells.is_array()) throw ScenarioError(join(path, "cells"), "expected an array");
    HypothesisSet set;
    for (std::size_t c = 0; c < cells.size(); ++c) parse_cell(cells[c], join(join(path, "cells"), c), dim, set);
    sets.push_back(std::move(set));
  }

  ParamVector truth(dim);
  if (doc.contains("truth")) {
    truth = get_numbers(doc["truth"], "/truth", dim);
    for (std::size_t u = 0; u < dim; ++u) {
      if (!models[u].in_domain(truth[u])) throw ScenarioError(join("/truth", u), "outside the natural domain");
      if (!means[u]) continue;
      const std::string path = join(join("/controls", u), "mean");
      const double implied = natural_from_observation_mean(models[u], *means[u], path);
      if (std::abs(implied - truth[u]) > 1e-9 * std::max(1.0, std::abs(truth[u]))) {
        throw ScenarioError(path, "disagrees with /truth/" + std::to_string(u));
      }
    }
  } else {
    for (std::size_t u = 0; u < dim; ++u) {
      const std::string path = join(join("/controls", u), "mean");
      if (!means[u]) throw ScenarioError(path, "missing key (needed when /truth is absent)");
      truth[u] = natural_from_observation_mean(models[u], *means[u], path);
    }
  }

  try {
    return Scenario{std::move(name), HypothesisSpace(std::move(models), std::move(sets)), std::move(truth)};
  } catch (const ConfigError& e) {
    throw ScenarioError("/hypotheses", e.what());
  }
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError(path.string(), "cannot open file");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_scenario(buffer.str());
}

std::string serialize_scenario(const Scenario& scenario) {
  json doc;
  doc["name"] = scenario.name;
  json controls = json::array();
  for (const ExpFamilyModel& model : scenario.space.models()) {
    json c{{"family", std::string(to_string(model.family()))}};
    if (model.family() == Family::Gaussian) c["sigma"] = model.sigma();
    controls.push_back(std::move(c));
  }
  doc["controls"] = std::move(controls);
  json hypotheses = json::array();
  for (const HypothesisSet& set : scenario.space.sets()) {
    json cells = json::array();
    for (const ConvexCell& cell : set) cells.push_back(cell_to_json(cell));
    hypotheses.push_back({{"cells", std::move(cells)}});
  }
  doc["hypotheses"] = std::move(hypotheses);
  doc["truth"] = scenario.truth;
  return doc.dump(2) + "\n";
}

}  // namespace ctsense
