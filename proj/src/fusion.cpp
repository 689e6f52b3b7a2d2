#include "timgen/fusion.hpp"

#include <algorithm>
#include <cmath>

#include "timgen/errors.hpp"
#include "timgen/numerics/functions.hpp"
#include "timgen/temporal.hpp"

namespace timgen {

FusionParams FusionParams::create(ParamStore& store, const ModalityDims& dims, std::size_t d_model,
                                  Rng& rng) {
  FusionParams p;
  for (auto kind : kAllModalities) {
    const std::string prefix = "fusion." + std::string(modality_name(kind)) + ".";
    auto& m = p.modality[index_of(kind)];
    m.proj_w = store.add(prefix + "proj.w", init_weight(dims[index_of(kind)], d_model, rng));
    m.proj_b = store.add(prefix + "proj.b", Matrix(1, d_model));
    m.w_query = store.add(prefix + "wq", init_weight(d_model, d_model, rng));
    m.w_key = store.add(prefix + "wk", init_weight(d_model, d_model, rng));
    m.w_value = store.add(prefix + "wv", init_weight(d_model, d_model, rng));
    m.scorer = store.add(prefix + "scorer", init_weight(d_model, 1, rng));
  }
  p.final_w = store.add("fusion.final.w", init_weight(2 * d_model, d_model, rng));
  return p;
}

ad::Var modality_attention(ad::Tape& tape, ad::Var raw, const ModalityFusionParams& p) {
  if (raw.rows() == 0) throw InvalidArgument("modality_attention: no present steps");
  ad::Var x = ad::add_row(ad::matmul(raw, tape.param(p.proj_w)), tape.param(p.proj_b));
  return scaled_dot_attention(ad::matmul(x, tape.param(p.w_query)), ad::matmul(x, tape.param(p.w_key)),
                              ad::matmul(x, tape.param(p.w_value)), /*causal=*/true);
}

std::vector<double> modality_context(const Matrix& raw, ModalityKind kind, const ParamStore& store,
                                     const FusionParams& p) {
  ad::Tape tape(&store);
  const Matrix& out = modality_attention(tape, tape.constant(raw), p.modality[index_of(kind)]).value();
  return out.row_copy(out.rows() - 1);
}

std::array<std::optional<double>, kModalityCount> modality_scores(const ModalityVectors& h,
                                                                  const ParamStore& store,
                                                                  const FusionParams& p) {
  std::array<std::optional<double>, kModalityCount> scores;
  for (auto kind : kAllModalities) {
    const auto m = index_of(kind);
    if (!h[m]) continue;
    const Matrix& w = store.value(p.modality[m].scorer);
    if (w.rows() != h[m]->size()) throw InvalidArgument("modality_scores: context width mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < w.rows(); ++i) s += w[i] * (*h[m])[i];
    scores[m] = s;
  }
  return scores;
}

ModalityWeights weights_from_scores(const std::array<std::optional<double>, kModalityCount>& scores) {
  std::vector<double> present;
  for (const auto& s : scores)
    if (s) present.push_back(*s);
  if (present.empty()) throw InvalidArgument("modality_weights: no modality present");
  const auto probs = softmax(present);
  ModalityWeights alpha{};
  std::size_t k = 0;
  for (std::size_t m = 0; m < kModalityCount; ++m)
    if (scores[m]) alpha[m] = probs[k++];
  return alpha;
}

ModalityWeights modality_weights(const ModalityVectors& h, const ParamStore& store,
                                 const FusionParams& p) {
  return weights_from_scores(modality_scores(h, store, p));
}

std::vector<double> fuse_multi(const ModalityVectors& h, const ModalityWeights& alpha) {
  std::vector<double> out;
  for (std::size_t m = 0; m < kModalityCount; ++m) {
    if (!h[m]) continue;
    if (out.empty()) out.assign(h[m]->size(), 0.0);
    if (h[m]->size() != out.size()) throw InvalidArgument("fuse_multi: context widths differ");
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += alpha[m] * (*h[m])[i];
  }
  if (out.empty()) throw InvalidArgument("fuse_multi: no modality present");
  return out;
}

ad::Var fuse_final(ad::Tape& tape, ad::Var z, ad::Var z_multi, const FusionParams& p) {
  const Matrix& w = tape.value(tape.param(p.final_w).id());
  if (z.cols() != z_multi.cols() || z.rows() != z_multi.rows() || z.cols() + z_multi.cols() != w.rows()) {
    throw InvalidArgument("fuse_final: z and z_multi must both have width d_model");
  }
  return ad::matmul(ad::concat_cols({z, z_multi}), tape.param(p.final_w));
}

std::vector<double> fuse_final(std::span<const double> z, std::span<const double> z_multi,
                               const ParamStore& store, const FusionParams& p) {
  ad::Tape tape(&store);
  return fuse_final(tape, tape.constant(Matrix::row_vector(z)), tape.constant(Matrix::row_vector(z_multi)), p)
      .value()
      .row_copy(0);
}

CutoffFusion fuse_at_cutoffs(ad::Tape& tape, const PreparedSequence& seq,
                             std::span<const std::size_t> cutoffs, const FusionParams& p,
                             std::size_t d_model) {
  const std::size_t n = cutoffs.size();
  if (n == 0) throw InvalidArgument("fuse_at_cutoffs: no cutoffs");
  const std::size_t last = *std::max_element(cutoffs.begin(), cutoffs.end());
  if (last >= seq.length()) throw InvalidArgument("fuse_at_cutoffs: cutoff beyond sequence");

  std::vector<ad::Var> contexts(kModalityCount);
  std::vector<ad::Var> score_columns(kModalityCount);
  std::vector<std::vector<bool>> mask(n, std::vector<bool>(kModalityCount, false));
  std::array<bool, kModalityCount> used{};

  for (auto kind : kAllModalities) {
    const auto m = index_of(kind);
    // Positions (within the modality's own series) of each present step <= last.
    std::vector<std::size_t> steps;
    for (std::size_t t = 0; t <= last; ++t)
      if (seq.present[t][m]) steps.push_back(t);
    if (steps.empty()) continue;
    std::vector<std::int64_t> step_rows(steps.begin(), steps.end());
    ad::Var raw = ad::gather_rows(tape.constant(seq.modality[m]), step_rows);
    ad::Var out = modality_attention(tape, raw, p.modality[m]);

    std::vector<std::int64_t> pick(n, -1);
    for (std::size_t i = 0; i < n; ++i) {
      auto it = std::upper_bound(steps.begin(), steps.end(), cutoffs[i]);
      if (it != steps.begin()) {
        pick[i] = std::distance(steps.begin(), it) - 1;
        mask[i][m] = true;
      }
    }
    contexts[m] = ad::gather_rows(out, pick);
    score_columns[m] = ad::matmul(contexts[m], tape.param(p.modality[m].scorer));
    used[m] = true;
  }

  std::vector<ad::Var> cols;
  std::vector<std::size_t> col_modality;
  for (std::size_t m = 0; m < kModalityCount; ++m) {
    if (!used[m]) continue;
    cols.push_back(score_columns[m]);
    col_modality.push_back(m);
  }
  if (cols.empty()) throw InvalidArgument("fuse_at_cutoffs: no modality present");
  std::vector<std::vector<bool>> col_mask(n, std::vector<bool>(cols.size()));
  for (std::size_t i = 0; i < n; ++i) {
    bool any = false;
    for (std::size_t c = 0; c < cols.size(); ++c) {
      col_mask[i][c] = mask[i][col_modality[c]];
      any = any || col_mask[i][c];
    }
    if (!any) throw InvalidArgument("fuse_at_cutoffs: cutoff with no modality present");
  }
  ad::Var alpha = ad::masked_softmax_rows(ad::concat_cols(cols), col_mask);

  ad::Var z_multi;
  for (std::size_t c = 0; c < cols.size(); ++c) {
    ad::Var term = ad::scale_rows(contexts[col_modality[c]], ad::slice_cols(alpha, c, 1));
    z_multi = z_multi.valid() ? ad::add(z_multi, term) : term;
  }
  if (z_multi.cols() != d_model) throw InvalidArgument("fuse_at_cutoffs: context width mismatch");

  CutoffFusion result{z_multi, std::vector<ModalityWeights>(n)};
  const Matrix& a = alpha.value();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < cols.size(); ++c) result.alpha[i][col_modality[c]] = a(i, c);
  return result;
}

}  // namespace timgen
