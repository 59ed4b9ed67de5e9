/* Copyright 2026 The SpeechSwin Authors.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "speechswin/model.hpp"

#include <cmath>

#include "speechswin/errors.hpp"
#include "speechswin/random.hpp"

namespace speechswin {

void ModelConfig::validate() const {
  if (depths.empty()) throw ConfigError("model: need at least one stage");
  if (heads.size() != depths.size()) {
    throw ConfigError("model: heads list must have one entry per stage");
  }
  for (int64_t d : depths) {
    if (d <= 0 || d % 2 != 0) {
      throw ConfigError("model: stage depths must be positive and even "
                        "(blocks alternate local/shifted)");
    }
  }
  if (embed_dim < 1) throw ConfigError("model: embed_dim must be positive");
  if (window_frames < 1) throw ConfigError("model: window width must be positive");
  if (mlp_ratio < 1) throw ConfigError("model: mlp_ratio must be positive");
  if (num_classes < 2) throw ConfigError("model: need at least two classes");
  if (mel_bands < 1 || frames < 1) {
    throw ConfigError("model: input extents must be positive");
  }
  if (time_segments < 1 || frames % time_segments != 0) {
    throw ConfigError("model: frame count " + std::to_string(frames) +
                      " is not divisible into " + std::to_string(time_segments) +
                      " time segments");
  }
  const int merges = num_stages() - 1;
  const int64_t div = int64_t{1} << merges;
  if (mel_bands % div != 0 || mel_bands / div < 1) {
    throw ConfigError("model: mel_bands must be divisible by 2^" +
                      std::to_string(merges) + " for patch merging");
  }
  if (segment_width() % div != 0 || segment_width() / div < 1) {
    throw ConfigError("model: segment width must be divisible by 2^" +
                      std::to_string(merges) + " for patch merging");
  }
  for (int s = 0; s < num_stages(); ++s) {
    if (heads[s] < 1 || stage_channels(s) % heads[s] != 0) {
      throw ConfigError("model: stage " + std::to_string(s) + " channels " +
                        std::to_string(stage_channels(s)) +
                        " not divisible by " + std::to_string(heads[s]) +
                        " heads");
    }
    if (stage_width(s) % stage_window(s) != 0) {
      throw ConfigError("model: stage " + std::to_string(s) + " width " +
                        std::to_string(stage_width(s)) +
                        " not divisible into windows of " +
                        std::to_string(stage_window(s)));
    }
  }
}

template <typename T>
WindowSet<T> window_partition(const Tensor<T>& grid, int64_t window_width) {
  if (grid.ndim() != 4) {
    throw ShapeError("window_partition: expected (batch, H, W, C), got " +
                     shape_str(grid.shape()));
  }
  const int64_t B = grid.dim(0), H = grid.dim(1), W = grid.dim(2), C = grid.dim(3);
  if (window_width < 1 || W % window_width != 0) {
    throw ShapeError("window_partition: width " + std::to_string(W) +
                     " not divisible into windows of " +
                     std::to_string(window_width));
  }
  const int64_t M = W / window_width;
  Tensor<T> t = ops::reshape(grid, {B, H, M, window_width, C});
  t = ops::permute(t, {0, 2, 1, 3, 4});  // (B, M, H, t, C)
  WindowSet<T> ws;
  ws.tokens = ops::reshape(t, {B * M, H * window_width, C});
  ws.grid_batch = B;
  ws.height = H;
  ws.grid_width = W;
  ws.window_width = window_width;
  return ws;
}

template <typename T>
Tensor<T> window_merge(const WindowSet<T>& ws) {
  const int64_t B = ws.grid_batch, H = ws.height, W = ws.grid_width,
                tw = ws.window_width;
  const int64_t M = ws.count();
  if (ws.tokens.ndim() != 3 || ws.tokens.dim(0) != B * M ||
      ws.tokens.dim(1) != H * tw || W % tw != 0) {
    throw ShapeError("window_merge: tokens " + shape_str(ws.tokens.shape()) +
                     " inconsistent with window metadata");
  }
  const int64_t C = ws.tokens.dim(2);
  Tensor<T> t = ops::reshape(ws.tokens, {B, M, H, tw, C});
  t = ops::permute(t, {0, 2, 1, 3, 4});  // (B, H, M, t, C)
  return ops::reshape(t, {B, H, W, C});
}

template <typename T>
Tensor<T> cyclic_shift(const Tensor<T>& grid, int64_t offset) {
  if (grid.ndim() != 4) {
    throw ShapeError("cyclic_shift: expected (batch, H, W, C), got " +
                     shape_str(grid.shape()));
  }
  if (offset == 0) return grid;
  return ops::roll(grid, offset, 2);
}

template <typename T>
Tensor<T> build_shift_mask(int64_t height, int64_t grid_width,
                           int64_t window_width, int64_t offset) {
  if (window_width < 1 || grid_width % window_width != 0) {
    throw ShapeError("build_shift_mask: width not divisible into windows");
  }
  if (offset < 0 || offset >= window_width) {
    throw ShapeError("build_shift_mask: offset must satisfy 0 <= offset < "
                     "window width");
  }
  const int64_t M = grid_width / window_width;
  const int64_t L = height * window_width;
  Tensor<T> mask({M, L, L});
  if (offset == 0) return mask;

  // After rolling left by `offset`, columns >= W - offset hold wrapped
  // content; pairs straddling that boundary may not attend to each other.
  const int64_t boundary = grid_width - offset;
  T* pm = mask.mutable_data();
  for (int64_t m = 0; m < M; ++m) {
    for (int64_t p = 0; p < L; ++p) {
      const bool gp = m * window_width + (p % window_width) >= boundary;
      for (int64_t q = 0; q < L; ++q) {
        const bool gq = m * window_width + (q % window_width) >= boundary;
        if (gp != gq) {
          pm[(m * L + p) * L + q] = static_cast<T>(kMaskNegInf);
        }
      }
    }
  }
  return mask;
}

std::vector<int64_t> relative_position_index(int64_t height, int64_t width) {
  const int64_t L = height * width;
  std::vector<int64_t> idx(L * L);
  for (int64_t p = 0; p < L; ++p) {
    const int64_t hp = p / width, wp = p % width;
    for (int64_t q = 0; q < L; ++q) {
      const int64_t hq = q / width, wq = q % width;
      const int64_t dh = hp - hq + height - 1;
      const int64_t dw = wp - wq + width - 1;
      idx[p * L + q] = dh * (2 * width - 1) + dw;
    }
  }
  return idx;
}

template <typename T>
WindowSet<T> window_msa(const WindowSet<T>& ws, const AttentionWeights<T>& w,
                        const Tensor<T>* mask, int64_t heads) {
  const Tensor<T>& x = ws.tokens;
  const int64_t BM = x.dim(0), L = x.dim(1), C = x.dim(2);
  if (heads < 1 || C % heads != 0) {
    throw ShapeError("window_msa: " + std::to_string(C) +
                     " channels not divisible by " + std::to_string(heads) +
                     " heads");
  }
  if (mask && mask->dim(0) != ws.count()) {
    throw ShapeError("window_msa: mask covers " + std::to_string(mask->dim(0)) +
                     " windows, grid has " + std::to_string(ws.count()));
  }
  const int64_t dh = C / heads;

  auto split_heads = [&](Tensor<T> t) {
    t = ops::reshape(std::move(t), {BM, L, heads, dh});
    return ops::permute(t, {0, 2, 1, 3});  // (BM, heads, L, dh)
  };
  Tensor<T> q = split_heads(ops::linear(x, *w.q_w, *w.q_b));
  Tensor<T> k = split_heads(ops::linear(x, *w.k_w, *w.k_b));
  Tensor<T> v = split_heads(ops::linear(x, *w.v_w, *w.v_b));

  Tensor<T> kt = ops::permute(k, {0, 1, 3, 2});
  const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));
  Tensor<T> scores = ops::matmul(q, kt, scale);  // (BM, heads, L, L)

  if (w.rel_bias_table) {
    Tensor<T> bias = ops::gather(*w.rel_bias_table, 0, *w.rel_index);
    bias = ops::reshape(bias, {L, L, heads});
    bias = ops::permute(bias, {2, 0, 1});  // (heads, L, L)
    scores = ops::add(scores, bias);
  }

  Tensor<T> probs = mask ? ops::masked_window_softmax(scores, *mask)
                         : ops::softmax(scores, -1);
  Tensor<T> ctx = ops::matmul(probs, v);  // (BM, heads, L, dh)
  ctx = ops::permute(ctx, {0, 2, 1, 3});
  ctx = ops::reshape(ctx, {BM, L, C});

  WindowSet<T> out = ws;
  out.tokens = ops::linear(ctx, *w.proj_w, *w.proj_b);
  return out;
}

template <typename T>
Tensor<T> patch_merging(const Tensor<T>& grid, const Tensor<T>& norm_gamma,
                        const Tensor<T>& norm_beta, const Tensor<T>& reduce_w,
                        const Tensor<T>& reduce_b) {
  if (grid.ndim() != 4) {
    throw ShapeError("patch_merging: expected (batch, H, W, C), got " +
                     shape_str(grid.shape()));
  }
  const int64_t H = grid.dim(1), W = grid.dim(2);
  if (H % 2 != 0 || W % 2 != 0) {
    throw ShapeError("patch_merging: spatial extents must be even, got " +
                     shape_str(grid.shape()));
  }
  std::vector<int64_t> he, ho, we, wo;
  for (int64_t i = 0; i < H; i += 2) he.push_back(i);
  for (int64_t i = 1; i < H; i += 2) ho.push_back(i);
  for (int64_t j = 0; j < W; j += 2) we.push_back(j);
  for (int64_t j = 1; j < W; j += 2) wo.push_back(j);

  auto sub = [&](const std::vector<int64_t>& rows,
                 const std::vector<int64_t>& cols) {
    return ops::gather(ops::gather(grid, 1, rows), 2, cols);
  };
  // Channel order: (even,even), (odd,even), (even,odd), (odd,odd).
  std::vector<Tensor<T>> parts{sub(he, we), sub(ho, we), sub(he, wo),
                               sub(ho, wo)};
  Tensor<T> merged = ops::concat(parts, 3);  // (B, H/2, W/2, 4C)
  merged = ops::layer_norm(merged, norm_gamma, norm_beta, T(1e-5));
  return ops::linear(merged, reduce_w, reduce_b);
}

namespace {

std::string block_prefix(int stage, int block) {
  return "stages." + std::to_string(stage) + ".blocks." + std::to_string(block) +
         ".";
}

std::string merge_prefix(int stage) {
  return "merges." + std::to_string(stage) + ".";
}

}  // namespace

template <typename T>
SwinModel<T>::SwinModel(ModelConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  auto zeros = [](Shape s) { return Tensor<T>(std::move(s)); };

  params_.add("patch_embed.weight", zeros({1, cfg_.embed_dim}));
  params_.add("patch_embed.bias", zeros({cfg_.embed_dim}));

  for (int s = 0; s < cfg_.num_stages(); ++s) {
    const int64_t C = cfg_.stage_channels(s);
    const int64_t hidden = C * cfg_.mlp_ratio;
    for (int b = 0; b < cfg_.depths[s]; ++b) {
      const std::string p = block_prefix(s, b);
      params_.add(p + "norm1.gamma", zeros({C}));
      params_.add(p + "norm1.beta", zeros({C}));
      for (const char* proj : {"attn.q", "attn.k", "attn.v", "attn.proj"}) {
        params_.add(p + proj + std::string(".weight"), zeros({C, C}));
        params_.add(p + proj + std::string(".bias"), zeros({C}));
      }
      if (cfg_.rel_pos_bias) {
        const int64_t H = cfg_.stage_height(s);
        const int64_t tw = cfg_.stage_window(s);
        params_.add(p + "attn.rel_bias.table",
                    zeros({(2 * H - 1) * (2 * tw - 1), cfg_.heads[s]}));
      }
      params_.add(p + "norm2.gamma", zeros({C}));
      params_.add(p + "norm2.beta", zeros({C}));
      params_.add(p + "mlp.fc1.weight", zeros({C, hidden}));
      params_.add(p + "mlp.fc1.bias", zeros({hidden}));
      params_.add(p + "mlp.fc2.weight", zeros({hidden, C}));
      params_.add(p + "mlp.fc2.bias", zeros({C}));
    }
    if (s + 1 < cfg_.num_stages()) {
      const std::string p = merge_prefix(s);
      params_.add(p + "norm.gamma", zeros({4 * C}));
      params_.add(p + "norm.beta", zeros({4 * C}));
      params_.add(p + "reduce.weight", zeros({4 * C, 2 * C}));
      params_.add(p + "reduce.bias", zeros({2 * C}));
    }
  }
  params_.add("final_norm.gamma", zeros({cfg_.feature_dim()}));
  params_.add("final_norm.beta", zeros({cfg_.feature_dim()}));
  params_.add("head.weight", zeros({cfg_.feature_dim(), cfg_.num_classes}));
  params_.add("head.bias", zeros({cfg_.num_classes}));

  shift_masks_.resize(cfg_.num_stages());
  rel_indices_.resize(cfg_.num_stages());
  for (int s = 0; s < cfg_.num_stages(); ++s) {
    const int64_t tw = cfg_.stage_window(s);
    const int64_t offset = tw / 2;
    if (offset > 0) {
      shift_masks_[s] = build_shift_mask<T>(cfg_.stage_height(s),
                                            cfg_.stage_width(s), tw, offset);
    }
    if (cfg_.rel_pos_bias) {
      rel_indices_[s] = relative_position_index(cfg_.stage_height(s), tw);
    }
  }
}

template <typename T>
void SwinModel<T>::init(uint64_t seed) {
  RandomSource rng(seed);
  for (size_t i = 0; i < params_.size(); ++i) {
    const std::string& name = params_.name(i);
    Tensor<T>& t = params_.tensor(i);
    T* p = t.mutable_data();
    const bool is_gamma = name.ends_with(".gamma");
    const bool is_zero = name.ends_with(".beta") || name.ends_with(".bias");
    for (int64_t j = 0; j < t.numel(); ++j) {
      if (is_gamma) {
        p[j] = T(1);
      } else if (is_zero) {
        p[j] = T(0);
      } else {
        p[j] = static_cast<T>(rng.trunc_normal(0.02));
      }
    }
  }
}

template <typename T>
Tensor<T> SwinModel<T>::run_block(const Tensor<T>& grid, int stage, int block,
                                  bool shifted) const {
  const std::string p = block_prefix(stage, block);
  const int64_t tw = cfg_.stage_window(stage);
  const int64_t offset = shifted ? tw / 2 : 0;

  Tensor<T> h = ops::layer_norm(grid, params_.at(p + "norm1.gamma"),
                                params_.at(p + "norm1.beta"), T(1e-5));
  if (offset > 0) h = cyclic_shift(h, offset);
  WindowSet<T> ws = window_partition(h, tw);

  AttentionWeights<T> aw;
  aw.q_w = &params_.at(p + "attn.q.weight");
  aw.q_b = &params_.at(p + "attn.q.bias");
  aw.k_w = &params_.at(p + "attn.k.weight");
  aw.k_b = &params_.at(p + "attn.k.bias");
  aw.v_w = &params_.at(p + "attn.v.weight");
  aw.v_b = &params_.at(p + "attn.v.bias");
  aw.proj_w = &params_.at(p + "attn.proj.weight");
  aw.proj_b = &params_.at(p + "attn.proj.bias");
  if (cfg_.rel_pos_bias) {
    aw.rel_bias_table = &params_.at(p + "attn.rel_bias.table");
    aw.rel_index = &rel_indices_[stage];
  }
  const Tensor<T>* mask = offset > 0 ? &shift_masks_[stage] : nullptr;
  ws = window_msa(ws, aw, mask, cfg_.heads[stage]);

  Tensor<T> attn = window_merge(ws);
  if (offset > 0) attn = cyclic_shift(attn, -offset);
  Tensor<T> u = ops::add(grid, attn);

  Tensor<T> m = ops::layer_norm(u, params_.at(p + "norm2.gamma"),
                                params_.at(p + "norm2.beta"), T(1e-5));
  m = ops::linear(m, params_.at(p + "mlp.fc1.weight"),
                  params_.at(p + "mlp.fc1.bias"));
  m = ops::gelu(m);
  m = ops::linear(m, params_.at(p + "mlp.fc2.weight"),
                  params_.at(p + "mlp.fc2.bias"));
  return ops::add(u, m);
}

template <typename T>
Tensor<T> SwinModel<T>::forward_impl(Tape<T>* tape, const Tensor<T>& x,
                                     std::vector<Tensor<T>>* stage_grids) const {
  if (x.ndim() != 4 || x.dim(1) != 1 || x.dim(2) != cfg_.mel_bands ||
      x.dim(3) != cfg_.frames) {
    throw ShapeError("forward: input " + shape_str(x.shape()) +
                     " does not match configuration (batch, 1, " +
                     std::to_string(cfg_.mel_bands) + ", " +
                     std::to_string(cfg_.frames) + ")");
  }
  if (tape) {
    // Leaves must be re-watched after every tape reset.
    const_cast<ParamSet<T>&>(params_).watch_all(*tape);
  }

  const int64_t batch = x.dim(0);
  const int64_t segs = cfg_.time_segments;
  const int64_t bands = cfg_.mel_bands;
  const int64_t segw = cfg_.segment_width();

  // Split the time axis into segments folded into the batch (shared weights).
  Tensor<T> g = ops::reshape(x, {batch, bands, segs, segw});
  g = ops::permute(g, {0, 2, 1, 3});
  g = ops::reshape(g, {batch * segs, bands, segw, 1});
  g = ops::linear(g, params_.at("patch_embed.weight"),
                  params_.at("patch_embed.bias"));

  for (int s = 0; s < cfg_.num_stages(); ++s) {
    for (int b = 0; b < cfg_.depths[s]; ++b) {
      g = run_block(g, s, b, /*shifted=*/b % 2 == 1);
    }
    if (stage_grids) stage_grids->push_back(g);
    if (s + 1 < cfg_.num_stages()) {
      const std::string p = merge_prefix(s);
      g = patch_merging(g, params_.at(p + "norm.gamma"),
                        params_.at(p + "norm.beta"),
                        params_.at(p + "reduce.weight"),
                        params_.at(p + "reduce.bias"));
    }
  }

  const int last = cfg_.num_stages() - 1;
  const int64_t Hl = cfg_.stage_height(last);
  const int64_t Wl = cfg_.stage_width(last);
  const int64_t C = cfg_.feature_dim();
  g = ops::layer_norm(g, params_.at("final_norm.gamma"),
                      params_.at("final_norm.beta"), T(1e-5));
  g = ops::reshape(g, {batch * segs, Hl * Wl, C});
  g = ops::mean_pool(g, 1);  // pool tokens
  g = ops::reshape(g, {batch, segs, C});
  g = ops::mean_pool(g, 1);  // pool segments
  return ops::linear(g, params_.at("head.weight"), params_.at("head.bias"));
}

template <typename T>
Tensor<T> SwinModel<T>::forward(Tape<T>* tape, const Tensor<T>& x) const {
  return forward_impl(tape, x, nullptr);
}

template <typename T>
std::vector<Tensor<T>> SwinModel<T>::feature_maps(const Tensor<T>& x) const {
  std::vector<Tensor<T>> grids;
  forward_impl(nullptr, x, &grids);

  const int64_t batch = x.dim(0);
  const int64_t segs = cfg_.time_segments;
  std::vector<Tensor<T>> maps;
  maps.reserve(grids.size());
  for (int s = 0; s < cfg_.num_stages(); ++s) {
    Tensor<T> m = ops::mean_pool(grids[s], 3);  // channel mean, (b*N, H, W)
    maps.push_back(ops::reshape(m, {batch, segs, cfg_.stage_height(s),
                                    cfg_.stage_width(s)}));
  }
  return maps;
}

template struct WindowSet<float>;
template struct WindowSet<double>;
template WindowSet<float> window_partition(const Tensor<float>&, int64_t);
template WindowSet<double> window_partition(const Tensor<double>&, int64_t);
template Tensor<float> window_merge(const WindowSet<float>&);
template Tensor<double> window_merge(const WindowSet<double>&);
template Tensor<float> cyclic_shift(const Tensor<float>&, int64_t);
template Tensor<double> cyclic_shift(const Tensor<double>&, int64_t);
template Tensor<float> build_shift_mask<float>(int64_t, int64_t, int64_t, int64_t);
template Tensor<double> build_shift_mask<double>(int64_t, int64_t, int64_t, int64_t);
template WindowSet<float> window_msa(const WindowSet<float>&,
                                     const AttentionWeights<float>&,
                                     const Tensor<float>*, int64_t);
template WindowSet<double> window_msa(const WindowSet<double>&,
                                      const AttentionWeights<double>&,
                                      const Tensor<double>*, int64_t);
template Tensor<float> patch_merging(const Tensor<float>&, const Tensor<float>&,
                                     const Tensor<float>&, const Tensor<float>&,
                                     const Tensor<float>&);
template Tensor<double> patch_merging(const Tensor<double>&,
                                      const Tensor<double>&,
                                      const Tensor<double>&,
                                      const Tensor<double>&,
                                      const Tensor<double>&);
template class SwinModel<float>;
template class SwinModel<double>;

}  // namespace speechswin
