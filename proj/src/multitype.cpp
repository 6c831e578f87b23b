#include "ldsim/multitype.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "ldsim/engine.hpp"

namespace ldsim {

double MultitypeModel::rate_cap(double M) const {
  double top = 0.0;
  for (double v : fecundity) top = std::max(top, v);
  for (const auto& row : competition)
    for (double v : row) top = std::max(top, v);
  double cap = top * M * M;
  if (mutation_enabled) cap = std::max(cap, M);
  return cap;
}

void MultitypeModel::validate() const {
  const int K = num_types();
  if (K < 1) throw std::invalid_argument("multitype model: empty type set");
  if (static_cast<int>(fecundity.size()) != K)
    throw std::invalid_argument("multitype model: fecundity size mismatch");
  for (double v : fecundity)
    if (!(v >= 0.0)) throw std::invalid_argument("multitype model: negative fecundity");
  if (static_cast<int>(competition.size()) != K)
    throw std::invalid_argument("multitype model: competition size mismatch");
  for (const auto& row : competition) {
    if (static_cast<int>(row.size()) != K)
      throw std::invalid_argument("multitype model: competition row size mismatch");
    for (double v : row)
      if (!(v >= 0.0)) throw std::invalid_argument("multitype model: negative competition");
  }
  if (mutation_enabled) {
    if (static_cast<int>(mutation.size()) != K)
      throw std::invalid_argument("multitype model: mutation size mismatch");
    for (const auto& row : mutation) {
      if (static_cast<int>(row.size()) != K)
        throw std::invalid_argument("multitype model: mutation row size mismatch");
      double sum = 0.0;
      for (double v : row) {
        if (!(v >= 0.0)) throw std::invalid_argument("multitype model: negative mutation rate");
        sum += v;
      }
      if (std::abs(sum - 1.0) > 1e-12)
        throw std::invalid_argument("multitype model: mutation row must sum to 1");
    }
  }
}

int MultitypeModel::lambda_draw(int h, double w) const {
  const auto& row = mutation[h];
  double total = 0.0;
  for (double v : row) total += v;
  const double target = w * total;
  double cum = 0.0;
  int last_positive = h;
  for (int k = 0; k < num_types(); ++k) {
    if (row[k] <= 0.0) continue;
    cum += row[k];
    last_positive = k;
    if (cum >= target) return k;
  }
  return last_positive;
}

MultitypeModel MultitypeModel::two_type_embedding(double b, double c) {
  MultitypeModel m;
  m.type_names = {"A", "B"};
  m.fecundity = {b, 0.0};
  m.competition = {{0.0, c}, {c, 0.0}};
  m.mutation_enabled = false;
  return m;
}

namespace {

std::vector<int> count_types(std::span<const std::uint8_t> g, int num_types) {
  std::vector<int> counts(num_types, 0);
  for (auto t : g) {
    if (t >= num_types) throw std::invalid_argument("type vector entry out of range");
    counts[t]++;
  }
  return counts;
}

}  // namespace

int q_general(int h, std::span<const std::uint8_t> g, double v, double z, double w, Mark mark,
              const MultitypeModel& model) {
  if (v <= 0.0) throw std::invalid_argument("q_general: v must be positive");
  if (z < 0.0 || w < 0.0 || w > 1.0) throw std::invalid_argument("q_general: bad marks");
  const int n = static_cast<int>(g.size());
  const auto counts = count_types(g, model.num_types());
  switch (mark) {
    case Mark::beta: {
      const double thr = model.beta_threshold(v, counts, n);
      if (!(z <= thr && thr > 0.0)) return h;
      const int parent =
          quantile_level(n, w, [&](int k) { return model.beta_weight(g[k]); });
      return g[parent];
    }
    case Mark::delta: {
      const double thr = model.delta_threshold(h, v, counts, n);
      if (!(z <= thr && thr > 0.0)) return h;
      const int parent = quantile_level(n, w, [](int) { return 1.0; });
      return g[parent];
    }
    case Mark::lambda: {
      if (!model.mutation_enabled) return h;
      if (!(z <= v)) return h;
      return model.lambda_draw(h, w);
    }
  }
  return h;
}

double drift_total_mass_general(double v, std::span<const std::uint8_t> g,
                                const MultitypeModel& model) {
  if (v <= 0.0) throw std::invalid_argument("drift_total_mass_general: v must be positive");
  const auto counts = count_types(g, model.num_types());
  return model.drift(v, counts, static_cast<int>(g.size()));
}

AdvanceResult advance_multitype(const RunConfig& cfg, const MultitypeModel& model,
                                std::span<const double> probe_s) {
  model.validate();
  Engine<MultitypeModel> engine(cfg, model);
  engine.run(probe_s);
  return {engine.snapshots(), engine.state()};
}

MultitypeModel multitype_model_from_json(const std::string& json_text) {
  const nlohmann::json j = nlohmann::json::parse(json_text);
  MultitypeModel m;
  m.type_names = j.at("types").get<std::vector<std::string>>();
  const int K = m.num_types();
  auto lut = [&](const std::string& name) {
    const auto it = std::find(m.type_names.begin(), m.type_names.end(), name);
    if (it == m.type_names.end())
      throw std::invalid_argument("multitype model: unknown type name " + name);
    return static_cast<int>(it - m.type_names.begin());
  };
  m.fecundity.assign(K, 0.0);
  for (const auto& [name, value] : j.at("b").items()) m.fecundity[lut(name)] = value.get<double>();
  m.competition.assign(K, std::vector<double>(K, 0.0));
  for (const auto& [name, row] : j.at("c").items())
    for (const auto& [name2, value] : row.items())
      m.competition[lut(name)][lut(name2)] = value.get<double>();
  if (j.contains("ell")) {
    m.mutation_enabled = true;
    m.mutation.assign(K, std::vector<double>(K, 0.0));
    for (const auto& [name, row] : j.at("ell").items())
      for (const auto& [name2, value] : row.items())
        m.mutation[lut(name)][lut(name2)] = value.get<double>();
  }
  m.validate();
  return m;
}

std::string multitype_model_to_json(const MultitypeModel& model) {
  nlohmann::json j;
  j["types"] = model.type_names;
  for (int h = 0; h < model.num_types(); ++h) {
    j["b"][model.type_names[h]] = model.fecundity[h];
    for (int k = 0; k < model.num_types(); ++k)
      j["c"][model.type_names[h]][model.type_names[k]] = model.competition[h][k];
    if (model.mutation_enabled)
      for (int k = 0; k < model.num_types(); ++k)
        j["ell"][model.type_names[h]][model.type_names[k]] = model.mutation[h][k];
  }
  return j.dump(2);
}

}  // namespace ldsim
