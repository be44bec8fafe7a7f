#include "flashrank/tuning.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "flashrank/error.hpp"

namespace flashrank {

namespace {

std::vector<double> LogSoftmax(const std::vector<double>& z) {
  const double hi = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double x : z) sum += std::exp(x - hi);
  const double lse = hi + std::log(sum);
  std::vector<double> out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = z[i] - lse;
  return out;
}

// First-step components and gold scores, resolved once per instance.
struct Prepared {
  std::vector<UtilityComponents> components;
  std::vector<double> gold_log_probs;
};

Prepared Prepare(const TuningInstance& instance, std::size_t budget, const CeScorer& scorer,
                 LengthMode mode) {
  const auto& cands = instance.candidates.candidates;
  if (cands.size() < 2) {
    throw ValidationError("listwise loss needs at least 2 candidates (query \"" +
                          instance.query.query_id + "\")");
  }
  Prepared p;
  std::vector<double> gold;
  for (const auto& c : cands) {
    auto it = instance.gold_ce.find(c.doc.id);
    if (it == instance.gold_ce.end()) {
      throw ValidationError("no gold score for candidate \"" + c.doc.id + "\" of query \"" +
                            instance.query.query_id + "\"");
    }
    gold.push_back(it->second);
    p.components.push_back(ComputeComponents(c.doc, {}, instance.query, budget, scorer, mode));
  }
  p.gold_log_probs = LogSoftmax(gold);
  return p;
}

double Loss(const Prepared& p, const Coefficients& coeffs) {
  std::vector<double> logits;
  logits.reserve(p.components.size());
  for (const auto& u : p.components) logits.push_back(WeightedGain(coeffs, u));
  const auto log_p = LogSoftmax(logits);
  double h = 0.0;
  for (std::size_t i = 0; i < log_p.size(); ++i) h -= std::exp(p.gold_log_probs[i]) * log_p[i];
  return h;
}

}  // namespace

GridSpec GridSpec::Default() {
  const std::vector<double> values = {0.0, 0.25, 0.5, 1.0, 2.0};
  return GridSpec{values, values, values, values};
}

std::size_t GridSpec::size() const {
  return alpha.size() * beta.size() * gamma.size() * delta.size();
}

void GridSpec::Validate() const {
  const std::pair<const char*, const std::vector<double>*> lists[] = {
      {"grid.alpha", &alpha}, {"grid.beta", &beta}, {"grid.gamma", &gamma}, {"grid.delta", &delta}};
  for (const auto& [key, values] : lists) {
    if (values->empty()) throw ValidationError(std::string(key) + " must not be empty");
    for (double v : *values) {
      if (!std::isfinite(v) || v < 0.0) {
        throw ValidationError(std::string(key) + " values must be finite and >= 0");
      }
    }
  }
}

double ListwiseLoss(const TuningInstance& instance, const Coefficients& coeffs,
                    std::size_t budget, const CeScorer& scorer, LengthMode mode) {
  return Loss(Prepare(instance, budget, scorer, mode), coeffs);
}

double GoldEntropy(const TuningInstance& instance) {
  std::vector<double> gold;
  for (const auto& c : instance.candidates.candidates) gold.push_back(instance.gold_ce.at(c.doc.id));
  if (gold.empty()) return 0.0;
  const auto log_g = LogSoftmax(gold);
  double h = 0.0;
  for (double lg : log_g) h -= std::exp(lg) * lg;
  return h;
}

GridResult GridSearch(const std::vector<TuningInstance>& instances, const GridSpec& grid,
                      std::size_t budget, const CeScorer& scorer, LengthMode mode) {
  if (instances.empty()) throw ValidationError("grid search needs at least one tuning instance");
  grid.Validate();

  std::vector<Prepared> prepared;
  prepared.reserve(instances.size());
  for (const auto& inst : instances) prepared.push_back(Prepare(inst, budget, scorer, mode));

  GridResult result;
  result.grid_size = grid.size();
  result.mean_loss = std::numeric_limits<double>::infinity();
  bool have_best = false;
  for (double a : grid.alpha) {
    for (double b : grid.beta) {
      for (double g : grid.gamma) {
        for (double d : grid.delta) {
          const Coefficients c{a, b, g, d};
          double sum = 0.0;
          for (const auto& p : prepared) sum += Loss(p, c);
          const double mean = sum / static_cast<double>(prepared.size());
          if (!have_best || mean < result.mean_loss) {
            result.best = c;
            result.mean_loss = mean;
            have_best = true;
          }
        }
      }
    }
  }
  return result;
}

std::vector<TuningRecord> LoadTuningRecords(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<TuningRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    TuningRecord rec;
    try {
      const auto j = nlohmann::json::parse(line);
      rec.query_id = j.at("query_id").get<std::string>();
      rec.query_text = j.at("query_text").get<std::string>();
      rec.candidate_ids = j.at("candidate_ids").get<std::vector<std::string>>();
      rec.gold_scores = j.at("gold_scores").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
      throw IoError(where + ": malformed tuning record (line " + std::to_string(line_no) +
                    "): " + e.what());
    }
    if (rec.candidate_ids.size() != rec.gold_scores.size()) {
      throw ValidationError(where + ": candidate_ids and gold_scores differ in length");
    }
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace flashrank
