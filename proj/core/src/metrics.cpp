#include "paraseq/metrics.hpp"

#include <stdexcept>

namespace paraseq {

Metrics evaluate(const std::vector<Label>& predictions, const std::vector<Label>& gold) {
  if (predictions.size() != gold.size())
    throw std::invalid_argument("evaluate: " + std::to_string(predictions.size()) +
                                " predictions vs " + std::to_string(gold.size()) + " gold labels");
  if (gold.empty()) throw std::invalid_argument("evaluate: empty input");

  Metrics m;
  std::int64_t correct = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const int g = static_cast<int>(gold[i]);
    const int p = static_cast<int>(predictions[i]);
    ++m.confusion[static_cast<std::size_t>(g)][static_cast<std::size_t>(p)];
    if (g == p) ++correct;
  }
  m.accuracy = static_cast<double>(correct) / static_cast<double>(gold.size());

  double f1_sum = 0;
  for (int c = 0; c < 3; ++c) {
    std::int64_t tp = m.confusion[static_cast<std::size_t>(c)][static_cast<std::size_t>(c)];
    std::int64_t gold_c = 0, pred_c = 0;
    for (int k = 0; k < 4; ++k) {
      gold_c += m.confusion[static_cast<std::size_t>(c)][static_cast<std::size_t>(k)];
      pred_c += m.confusion[static_cast<std::size_t>(k)][static_cast<std::size_t>(c)];
    }
    ClassMetrics& cm = m.per_class[static_cast<std::size_t>(c)];
    cm.precision = pred_c > 0 ? static_cast<double>(tp) / static_cast<double>(pred_c) : 0.0;
    cm.recall = gold_c > 0 ? static_cast<double>(tp) / static_cast<double>(gold_c) : 0.0;
    const double pr = cm.precision + cm.recall;
    cm.f1 = pr > 0 ? 2.0 * cm.precision * cm.recall / pr : 0.0;
    if (gold_c == 0 && pred_c == 0) {
      cm.absent = true;
      m.flags.push_back(std::string("class '") + label_name(static_cast<Label>(c)) +
                        "' absent from gold and predictions; F1 = 0 by convention");
    }
    f1_sum += cm.f1;
  }
  m.mean_f1 = f1_sum / 3.0;
  return m;
}

Metrics evaluate(const std::vector<int>& predictions, const std::vector<int>& gold) {
  std::vector<Label> p(predictions.size()), g(gold.size());
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (predictions[i] < 0 || predictions[i] >= kNumLabels)
      throw std::invalid_argument("evaluate: prediction out of label range");
    p[i] = static_cast<Label>(predictions[i]);
  }
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i] < 0 || gold[i] >= kNumLabels)
      throw std::invalid_argument("evaluate: gold label out of range");
    g[i] = static_cast<Label>(gold[i]);
  }
  return evaluate(p, g);
}

nlohmann::ordered_json Metrics::to_json() const {
  nlohmann::ordered_json j;
  j["accuracy"] = accuracy;
  j["mean_f1"] = mean_f1;
  nlohmann::ordered_json pc;
  const char* names[3] = {"basic", "theorem", "proof"};
  for (int c = 0; c < 3; ++c) {
    const ClassMetrics& cm = per_class[static_cast<std::size_t>(c)];
    pc[names[c]] = {{"precision", cm.precision}, {"recall", cm.recall}, {"f1", cm.f1}};
  }
  j["per_class"] = std::move(pc);
  nlohmann::ordered_json conf = nlohmann::ordered_json::array();
  for (const auto& row : confusion) {
    nlohmann::ordered_json r = nlohmann::ordered_json::array();
    for (std::int64_t v : row) r.push_back(v);
    conf.push_back(std::move(r));
  }
  j["confusion"] = std::move(conf);
  if (!flags.empty()) j["flags"] = flags;
  return j;
}

}  // namespace paraseq
