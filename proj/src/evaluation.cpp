#include "c2f/evaluation.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include "c2f/error.hpp"
#include "c2f/simd/kernels.hpp"

namespace c2f {
namespace {

double f1_from_counts(std::size_t tp, std::size_t fp, std::size_t fn) {
  const std::size_t denom = 2 * tp + fp + fn;
  return denom == 0 ? 0.0 : static_cast<double>(2 * tp) / static_cast<double>(denom);
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

Prediction predict(std::span<const double> passage_rep, std::span<const FineId> candidates, const Matrix& fine_reps) {
  if (candidates.empty()) throw Error("evaluation", "no candidates to predict from");
  Prediction best{candidates.front(), -std::numeric_limits<double>::infinity()};
  const double pn = std::sqrt(simd::dot(passage_rep, passage_rep));
  for (FineId f : candidates) {
    const auto l = fine_reps.row(index(f));
    const double ln = std::sqrt(simd::dot(l, l));
    const double cos = simd::dot(passage_rep, l) / (pn * ln);
    if (cos > best.score || (cos == best.score && index(f) < index(best.label))) best = Prediction{f, cos};
  }
  return best;
}

std::vector<Prediction> predict_all(const ProjectionHead& head, const Matrix& passage_base, const Matrix& bank,
                                    const Corpus& corpus, const Taxonomy& taxonomy) {
  if (passage_base.rows() != corpus.size()) throw Error("evaluation", "passage embeddings do not align with corpus");
  const Matrix reps = head.project_all(bank);
  std::vector<Prediction> out;
  out.reserve(corpus.size());
  ProjectionHead::Activation act;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    head.forward(passage_base.row(i), act);
    out.push_back(predict(act.z, taxonomy.candidates(corpus[i].coarse), reps));
  }
  return out;
}

EvalReport evaluate(std::span<const FineId> predictions, const GoldLabels& gold, const Taxonomy& taxonomy) {
  if (predictions.size() != gold.size()) throw Error("evaluation", "predictions and gold labels differ in length");
  const std::size_t nf = taxonomy.fine_count();
  EvalReport r;
  r.confusion.assign(nf, std::vector<std::size_t>(nf, 0));
  std::size_t correct = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (!gold[i]) continue;
    if (index(predictions[i]) >= nf) throw Error("evaluation", "prediction id out of range");
    ++r.confusion[index(*gold[i])][index(predictions[i])];
    ++r.evaluated;
    if (predictions[i] == *gold[i]) ++correct;
  }
  if (r.evaluated == 0) throw Error("evaluation", "no passage has a gold fine label");

  r.per_class.resize(nf);
  for (std::size_t k = 0; k < nf; ++k) {
    ClassMetrics& m = r.per_class[k];
    m.label = fine_id(k);
    m.true_positive = r.confusion[k][k];
    for (std::size_t j = 0; j < nf; ++j) {
      m.support += r.confusion[k][j];
      m.predicted += r.confusion[j][k];
    }
    m.precision = m.predicted == 0 ? 0.0 : static_cast<double>(m.true_positive) / static_cast<double>(m.predicted);
    m.recall = m.support == 0 ? 0.0 : static_cast<double>(m.true_positive) / static_cast<double>(m.support);
    m.f1 = f1_from_counts(m.true_positive, m.predicted - m.true_positive, m.support - m.true_positive);
  }

  // Single-label: global TP / (TP + FP) is the fraction correct.
  r.micro_f1 = static_cast<double>(correct) / static_cast<double>(r.evaluated);

  double f1_sum = 0.0;
  std::size_t present = 0;
  for (const ClassMetrics& m : r.per_class) {
    if (m.support == 0) continue;
    f1_sum += m.f1;
    ++present;
  }
  r.macro_f1 = f1_sum / static_cast<double>(present);

  for (const CoarseLabel& c : taxonomy.coarse_labels()) {
    CoarseReport cr;
    cr.coarse = c.id;
    std::size_t coarse_correct = 0;
    double sum = 0.0;
    std::size_t classes = 0;
    // Metrics on the sub-matrix restricted to this coarse label's children.
    for (FineId g : c.children) {
      std::size_t support = 0;
      std::size_t predicted = 0;
      for (FineId p : c.children) {
        support += r.confusion[index(g)][index(p)];
        predicted += r.confusion[index(p)][index(g)];
      }
      const std::size_t tp = r.confusion[index(g)][index(g)];
      cr.evaluated += support;
      coarse_correct += tp;
      if (support == 0) continue;
      sum += f1_from_counts(tp, predicted - tp, support - tp);
      ++classes;
    }
    cr.micro_f1 = cr.evaluated == 0 ? 0.0 : static_cast<double>(coarse_correct) / static_cast<double>(cr.evaluated);
    cr.macro_f1 = classes == 0 ? 0.0 : sum / static_cast<double>(classes);
    r.per_coarse.push_back(cr);
  }
  return r;
}

CountMatrix confusion_by_coarse(const EvalReport& report, const Taxonomy& taxonomy, CoarseId coarse) {
  if (index(coarse) >= taxonomy.coarse_count()) throw Error("evaluation", "unknown coarse id");
  const auto children = taxonomy.candidates(coarse);
  CountMatrix sub(children.size(), std::vector<std::size_t>(children.size(), 0));
  for (std::size_t i = 0; i < children.size(); ++i) {
    for (std::size_t j = 0; j < children.size(); ++j) sub[i][j] = report.confusion[index(children[i])][index(children[j])];
  }
  return sub;
}

void write_report(std::ostream& out, const EvalReport& report, const Taxonomy& taxonomy) {
  out << "evaluated\t" << report.evaluated << '\n';
  out << "micro_f1\t" << fixed(report.micro_f1, 6) << '\n';
  out << "macro_f1\t" << fixed(report.macro_f1, 6) << '\n';
  out << "\nclass\tcoarse\tsupport\tpredicted\tprecision\trecall\tf1\n";
  for (const ClassMetrics& m : report.per_class) {
    const FineLabel& f = taxonomy.fine(m.label);
    out << f.surface_name << '\t' << taxonomy.coarse(f.parent).surface_name << '\t' << m.support << '\t'
        << m.predicted << '\t' << fixed(m.precision, 6) << '\t' << fixed(m.recall, 6) << '\t' << fixed(m.f1, 6)
        << '\n';
  }
  out << "\ncoarse\tevaluated\tmicro_f1\tmacro_f1\n";
  for (const CoarseReport& c : report.per_coarse) {
    out << taxonomy.coarse(c.coarse).surface_name << '\t' << c.evaluated << '\t' << fixed(c.micro_f1, 6) << '\t'
        << fixed(c.macro_f1, 6) << '\n';
  }
}

void write_confusion_table(std::ostream& out, const CountMatrix& counts, std::span<const FineId> labels,
                           const Taxonomy& taxonomy) {
  out << "gold\\predicted";
  for (FineId f : labels) out << '\t' << taxonomy.fine(f).surface_name;
  out << '\n';
  for (std::size_t i = 0; i < labels.size(); ++i) {
    out << taxonomy.fine(labels[i]).surface_name;
    for (std::size_t j = 0; j < labels.size(); ++j) out << '\t' << counts[i][j];
    out << '\n';
  }
}

}  // namespace c2f
