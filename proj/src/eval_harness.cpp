#include "ncl/eval_harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "ncl/errors.hpp"
#include "ncl/seeding.hpp"

namespace ncl {

std::vector<RankedList> rank_by_l2(const EmbeddingTable& vectors, const IdMap& ids,
                                   const RankingTask& task) {
  auto row_of = [&](const std::string& id) {
    const Index r = ids.index_of(id);
    if (r >= vectors.rows()) throw DataError("paper '" + id + "' has no vector");
    return r;
  };
  std::vector<RankedList> out;
  out.reserve(task.size());
  for (const auto& q : task) {
    const Eigen::RowVectorXd qv = vectors.row(row_of(q.query)).cast<double>();
    struct Scored {
      double dist;
      Index row;
      const std::string* id;
    };
    std::vector<Scored> scored;
    scored.reserve(q.candidates.size());
    for (const auto& c : q.candidates) {
      const Index r = row_of(c);
      scored.push_back({(vectors.row(r).cast<double>() - qv).norm(), r, &c});
    }
    std::sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
      return a.dist < b.dist || (a.dist == b.dist && a.row < b.row);
    });
    RankedList list;
    list.query = q.query;
    for (const auto& s : scored) {
      list.ranked.push_back(*s.id);
      list.relevant.push_back(q.relevant.contains(*s.id) ? 1 : 0);
    }
    out.push_back(std::move(list));
  }
  return out;
}

double average_precision(std::span<const char> relevance) {
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < relevance.size(); ++i) {
    if (!relevance[i]) continue;
    ++hits;
    sum += static_cast<double>(hits) / static_cast<double>(i + 1);
  }
  if (hits == 0) return std::numeric_limits<double>::quiet_NaN();
  return sum / static_cast<double>(hits);
}

double ndcg(std::span<const char> relevance) {
  double dcg = 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < relevance.size(); ++i) {
    if (!relevance[i]) continue;
    ++hits;
    dcg += 1.0 / std::log2(static_cast<double>(i + 2));
  }
  if (hits == 0) return std::numeric_limits<double>::quiet_NaN();
  double ideal = 0.0;
  for (std::size_t i = 0; i < hits; ++i) ideal += 1.0 / std::log2(static_cast<double>(i + 2));
  return dcg / ideal;
}

namespace {

template <typename F>
MetricSummary mean_over(std::span<const RankedList> lists, F metric) {
  MetricSummary s;
  double sum = 0.0;
  for (const auto& l : lists) {
    const double v = metric(std::span<const char>(l.relevant));
    if (std::isnan(v)) {
      ++s.excluded;
      continue;
    }
    sum += v;
    ++s.evaluated;
  }
  s.value = s.evaluated ? sum / static_cast<double>(s.evaluated) : 0.0;
  return s;
}

}  // namespace

MetricSummary mean_average_precision(std::span<const RankedList> lists) {
  return mean_over(lists, average_precision);
}

MetricSummary mean_ndcg(std::span<const RankedList> lists) { return mean_over(lists, ndcg); }

MetricSummary precision_at_1(std::span<const RankedList> lists) {
  MetricSummary s;
  std::size_t hits = 0;
  for (const auto& l : lists) {
    if (l.relevant.empty()) throw ArgumentError("precision_at_1: empty ranking");
    hits += l.relevant.front() ? 1 : 0;
    ++s.evaluated;
  }
  s.value = s.evaluated ? static_cast<double>(hits) / static_cast<double>(s.evaluated) : 0.0;
  return s;
}

double macro_f1(std::span<const int> truth, std::span<const int> predicted, int num_classes) {
  if (truth.size() != predicted.size()) throw ArgumentError("macro_f1: size mismatch");
  if (num_classes < 1) throw ArgumentError("macro_f1: num_classes must be >= 1");
  std::vector<double> tp(num_classes), fp(num_classes), fn(num_classes);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] == predicted[i]) {
      tp[truth[i]] += 1;
    } else {
      fp[predicted[i]] += 1;
      fn[truth[i]] += 1;
    }
  }
  double sum = 0.0;
  for (int c = 0; c < num_classes; ++c) {
    const double denom = 2 * tp[c] + fp[c] + fn[c];
    sum += denom > 0 ? 2 * tp[c] / denom : 0.0;
  }
  return sum / num_classes;
}

std::vector<int> fit_predict_logistic(const Eigen::MatrixXd& train, std::span<const int> labels,
                                      int num_classes, const Eigen::MatrixXd& test,
                                      const ProbeConfig& cfg) {
  if (num_classes < 2) throw ArgumentError("linear probe needs at least two classes");
  if (train.rows() != static_cast<Eigen::Index>(labels.size()) || train.rows() == 0) {
    throw ArgumentError("linear probe: train rows and labels disagree");
  }
  if (test.cols() != train.cols()) throw ArgumentError("linear probe: feature dims differ");

  const Eigen::RowVectorXd mean = train.colwise().mean();
  Eigen::RowVectorXd scale =
      ((train.rowwise() - mean).array().square().colwise().mean()).sqrt().matrix();
  for (Eigen::Index j = 0; j < scale.size(); ++j) {
    if (scale[j] == 0.0) scale[j] = 1.0;
  }
  const Eigen::MatrixXd x = (train.rowwise() - mean).array().rowwise() / scale.array();

  Eigen::MatrixXd onehot = Eigen::MatrixXd::Zero(train.rows(), num_classes);
  for (Eigen::Index i = 0; i < train.rows(); ++i) onehot(i, labels[i]) = 1.0;

  Rng rng(derive_seed(cfg.seed, "probe"));
  std::normal_distribution<double> gauss(0.0, 0.01);
  Eigen::MatrixXd w(train.cols(), num_classes);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = gauss(rng);
  Eigen::RowVectorXd b = Eigen::RowVectorXd::Zero(num_classes);
  const double inv_n = 1.0 / static_cast<double>(train.rows());

  auto softmax = [](Eigen::MatrixXd logits) {
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
      logits.row(i).array() -= logits.row(i).maxCoeff();
      logits.row(i) = logits.row(i).array().exp().matrix();
      logits.row(i) /= logits.row(i).sum();
    }
    return logits;
  };
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const Eigen::MatrixXd err = softmax((x * w).rowwise() + b) - onehot;
    w -= cfg.learning_rate * (inv_n * x.transpose() * err + cfg.l2 * w);
    b -= cfg.learning_rate * inv_n * err.colwise().sum();
  }

  const Eigen::MatrixXd xt = (test.rowwise() - mean).array().rowwise() / scale.array();
  const Eigen::MatrixXd logits = (xt * w).rowwise() + b;
  std::vector<int> pred(static_cast<std::size_t>(test.rows()));
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    Eigen::Index best = 0;
    logits.row(i).maxCoeff(&best);
    pred[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return pred;
}

ProbeResult linear_probe_f1(const EmbeddingTable& vectors, const IdMap& ids,
                            std::span<const LabeledItem> data, const ProbeConfig& cfg) {
  std::set<std::string> classes;
  for (const auto& it : data) {
    if (it.train) classes.insert(it.label);
  }
  if (classes.size() < 2) throw ArgumentError("linear probe: train split has fewer than 2 labels");
  ProbeResult r;
  r.classes.assign(classes.begin(), classes.end());
  auto class_of = [&](const std::string& label) {
    auto it = std::lower_bound(r.classes.begin(), r.classes.end(), label);
    if (it == r.classes.end() || *it != label) {
      throw DataError("label '" + label + "' appears only in the test split");
    }
    return static_cast<int>(it - r.classes.begin());
  };
  std::vector<const LabeledItem*> train, test;
  for (const auto& it : data) (it.train ? train : test).push_back(&it);
  if (test.empty()) throw ArgumentError("linear probe: empty test split");

  auto features = [&](const std::vector<const LabeledItem*>& items) {
    Eigen::MatrixXd x(static_cast<Eigen::Index>(items.size()), vectors.dim());
    for (std::size_t i = 0; i < items.size(); ++i) {
      const Index row = ids.index_of(items[i]->id);
      if (row >= vectors.rows()) throw DataError("paper '" + items[i]->id + "' has no vector");
      x.row(static_cast<Eigen::Index>(i)) = vectors.row(row).cast<double>();
    }
    return x;
  };
  std::vector<int> y_train, y_test;
  for (auto* it : train) y_train.push_back(class_of(it->label));
  for (auto* it : test) y_test.push_back(class_of(it->label));
  const int k = static_cast<int>(r.classes.size());
  const auto pred = fit_predict_logistic(features(train), y_train, k, features(test), cfg);
  r.macro_f1 = macro_f1(y_test, pred, k);
  r.train_size = train.size();
  r.test_size = test.size();
  return r;
}

namespace {
double percent_1dp(std::size_t part, std::size_t whole) {
  if (whole == 0) return 0.0;
  return std::round(1000.0 * static_cast<double>(part) / static_cast<double>(whole)) / 10.0;
}
}  // namespace

OverlapReport overlap_report(const std::unordered_set<std::string>& train_ids,
                             const std::map<std::string, std::unordered_set<std::string>>& eval_ids) {
  OverlapReport r;
  r.train_size = train_ids.size();
  std::unordered_set<std::string> combined;
  for (const auto& [split, ids] : eval_ids) {
    std::size_t n = 0;
    for (const auto& id : ids) {
      if (train_ids.contains(id)) {
        ++n;
        combined.insert(id);
      }
    }
    r.rows.push_back({split, n, percent_1dp(n, r.train_size)});
  }
  r.rows.push_back({"combined", combined.size(), percent_1dp(combined.size(), r.train_size)});
  return r;
}

std::string format_overlap(const OverlapReport& r) {
  std::ostringstream out;
  out << "training papers: " << r.train_size << '\n';
  for (const auto& row : r.rows) {
    out << std::left << std::setw(12) << row.split << std::right << std::setw(10) << row.overlap
        << std::setw(8) << std::fixed << std::setprecision(1) << row.percent << "%\n";
  }
  return out.str();
}

Separation label_separation(const EmbeddingTable& vectors, const IdMap& ids,
                            std::span<const LabeledItem> data) {
  std::vector<Eigen::RowVectorXd> v;
  std::vector<const std::string*> label;
  for (const auto& it : data) {
    const Index r = ids.index_of(it.id);
    if (r >= vectors.rows()) throw DataError("paper '" + it.id + "' has no vector");
    v.push_back(vectors.row(r).cast<double>());
    label.push_back(&it.label);
  }
  double intra = 0, inter = 0;
  std::size_t n_intra = 0, n_inter = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    for (std::size_t j = i + 1; j < v.size(); ++j) {
      const double d = (v[i] - v[j]).norm();
      if (*label[i] == *label[j]) {
        intra += d;
        ++n_intra;
      } else {
        inter += d;
        ++n_inter;
      }
    }
  }
  return {n_intra ? intra / static_cast<double>(n_intra) : 0.0,
          n_inter ? inter / static_cast<double>(n_inter) : 0.0};
}

std::string Report::to_json() const {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [k, v] : metrics) j[k] = v;
  return j.dump(2) + "\n";
}

std::string Report::to_text() const {
  std::ostringstream out;
  std::size_t width = 6;
  for (const auto& [k, v] : metrics) width = std::max(width, k.size());
  out << std::left << std::setw(static_cast<int>(width)) << "metric" << "  value\n";
  out << std::string(width + 12, '-') << '\n';
  for (const auto& [k, v] : metrics) {
    out << std::left << std::setw(static_cast<int>(width)) << k << "  " << std::fixed
        << std::setprecision(4) << v << '\n';
  }
  return out.str();
}

namespace {

template <typename F>
void for_each_json_line(const std::filesystem::path& path, F f) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      f(nlohmann::json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path.string(), lineno, e.what());
    } catch (const ArgumentError& e) {
      throw ParseError(path.string(), lineno, e.what());
    }
  }
}

}  // namespace

RankingTask read_ranking_task(const std::filesystem::path& path) {
  RankingTask task;
  for_each_json_line(path, [&](const nlohmann::json& j) {
    RankingQuery q;
    q.query = j.at("query").get<std::string>();
    q.candidates = j.at("candidates").get<std::vector<std::string>>();
    for (const auto& r : j.at("relevant")) q.relevant.insert(r.get<std::string>());
    if (q.candidates.empty()) throw ArgumentError("query without candidates");
    const std::unordered_set<std::string> cand(q.candidates.begin(), q.candidates.end());
    for (const auto& r : q.relevant) {
      if (!cand.contains(r)) throw ArgumentError("relevant id '" + r + "' is not a candidate");
    }
    task.push_back(std::move(q));
  });
  return task;
}

std::vector<LabeledItem> read_labeled_set(const std::filesystem::path& path) {
  std::vector<LabeledItem> items;
  for_each_json_line(path, [&](const nlohmann::json& j) {
    const auto split = j.value("split", std::string("train"));
    if (split != "train" && split != "test") throw ArgumentError("split must be train or test");
    items.push_back({j.at("id").get<std::string>(), j.at("label").get<std::string>(),
                     split == "train"});
  });
  return items;
}

}  // namespace ncl
