#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "nextpoi/model.hpp"

namespace nextpoi::model {

using num::Tensor;
using num::Var;

namespace {

Var row_dot(Var a, Var b) {
  auto& tape = a.tape();
  const Var ones = tape.constant(Tensor(a.shape().cols, 1, 1.0));
  return num::matmul(num::hadamard(a, b), ones);
}

std::vector<double> first_columns(const Tensor& t, std::size_t row, std::size_t count) {
  const auto r = t.row_span(row);
  return {r.begin(), r.begin() + static_cast<std::ptrdiff_t>(count)};
}

Tensor top_left(const Tensor& t, std::size_t n) {
  Tensor out(n, n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) out(r, c) = t(r, c);
  }
  return out;
}

bool canonical_less(const CheckIn& a, const CheckIn& b) {
  if (a.time != b.time) return a.time < b.time;
  if (a.user != b.user) return a.user < b.user;
  if (a.poi != b.poi) return a.poi < b.poi;
  return a.position < b.position;
}

}  // namespace

std::vector<CheckIn> select_ltsc(std::span<const CheckIn> pool, UserIdx user, Variant variant,
                                 std::size_t limit) {
  std::vector<CheckIn> own, friends;
  for (const auto& c : pool) (c.user == user ? own : friends).push_back(c);
  std::vector<CheckIn> out;
  switch (variant) {
    case Variant::full:
      out.assign(pool.begin(), pool.end());
      break;
    case Variant::self_only:
    case Variant::long_only:
      out = std::move(own);
      break;
    case Variant::social_only:
      out = friends.empty() ? std::move(own) : std::move(friends);
      break;
    case Variant::short_only:
      break;
  }
  std::sort(out.begin(), out.end(), canonical_less);
  if (out.size() > limit) out.erase(out.begin(), out.end() - static_cast<std::ptrdiff_t>(limit));
  return out;
}

Network::Network(num::Tape& tape, const ModelParams& params, Trainable* grads)
    : tape_(tape), params_(params), grads_(grads) {
  const auto& t = params.trainable;
  if (t.stc_layers.size() != params.config.layers || t.ltsc_layers.size() != params.config.layers) {
    throw std::invalid_argument("Network: layer count does not match config");
  }
  if (t.poi_table.rows() != params.location_table.rows()) {
    throw std::invalid_argument("Network: POI table has " + std::to_string(t.poi_table.rows()) +
                                " rows but location table has " +
                                std::to_string(params.location_table.rows()));
  }
  auto sink = [&](auto member) -> Tensor* { return grads_ ? &(grads_->*member) : nullptr; };
  w_user_ = bind(t.w_user, sink(&Trainable::w_user));
  w_poi_ = bind(t.w_poi, sink(&Trainable::w_poi));
  w_loc_ = bind(t.w_loc, sink(&Trainable::w_loc));
  w_time_ = bind(t.w_time, sink(&Trainable::w_time));
  w_pos_ = bind(t.w_pos, sink(&Trainable::w_pos));
  auto bind_layers = [&](const std::vector<LayerParams>& src, std::vector<LayerParams>* g,
                         std::vector<BoundLayer>& dst) {
    for (std::size_t k = 0; k < src.size(); ++k) {
      LayerParams* gl = g ? &(*g)[k] : nullptr;
      const auto& l = src[k];
      dst.push_back({bind(l.attn, gl ? &gl->attn : nullptr), bind(l.ff1, gl ? &gl->ff1 : nullptr),
                     bind(l.ff2, gl ? &gl->ff2 : nullptr),
                     bind(l.ln1_gain, gl ? &gl->ln1_gain : nullptr),
                     bind(l.ln1_bias, gl ? &gl->ln1_bias : nullptr),
                     bind(l.ln2_gain, gl ? &gl->ln2_gain : nullptr),
                     bind(l.ln2_bias, gl ? &gl->ln2_bias : nullptr)});
    }
  };
  bind_layers(t.stc_layers, grads_ ? &grads_->stc_layers : nullptr, stc_layers_);
  bind_layers(t.ltsc_layers, grads_ ? &grads_->ltsc_layers : nullptr, ltsc_layers_);
}

Var Network::bind(const Tensor& value, Tensor* sink) { return tape_.param(value, sink); }

Var Network::user_vector(UserIdx user) {
  if (user.get() >= params_.user_table.rows()) {
    throw std::out_of_range("unknown user index " + std::to_string(user.get()));
  }
  const std::size_t row = user.get();
  return num::gather_rows(tape_, params_.user_table, nullptr, std::span(&row, 1));
}

Var Network::embed_checkins(std::span<const CheckIn> checkins, Channel channel,
                            Timestamp prediction_time) {
  if (checkins.empty()) throw std::invalid_argument("embed_checkins: no check-ins");
  const auto& cfg = params_.config;
  std::vector<std::size_t> users, pois, buckets;
  for (const auto& c : checkins) {
    if (c.user.get() >= params_.user_table.rows()) {
      throw std::out_of_range("unknown user index " + std::to_string(c.user.get()));
    }
    if (c.poi.get() >= params_.poi_count()) {
      throw std::out_of_range("unknown POI index " + std::to_string(c.poi.get()));
    }
    users.push_back(c.user.get());
    pois.push_back(c.poi.get());
    buckets.push_back(time_bucket(hours_between(c.time, prediction_time), cfg.time_buckets));
  }
  const auto& t = params_.trainable;
  const Var u = num::gather_rows(tape_, params_.user_table, nullptr, users);
  const Var v = num::gather_rows(tape_, t.poi_table, grads_ ? &grads_->poi_table : nullptr, pois);
  const Var l = num::gather_rows(tape_, params_.location_table, nullptr, pois);
  const Var tb = num::gather_rows(tape_, t.time_table, grads_ ? &grads_->time_table : nullptr, buckets);
  Var sum = num::add(num::add(num::matmul(u, w_user_), num::matmul(v, w_poi_)),
                     num::add(num::matmul(l, w_loc_), num::matmul(tb, w_time_)));
  if (channel == Channel::stc) {
    Tensor p(checkins.size(), cfg.d);
    for (std::size_t i = 0; i < checkins.size(); ++i) {
      const auto enc = position_encoding(checkins[i].position, cfg.d);
      std::copy(enc.begin(), enc.end(), p.row_span(i).begin());
    }
    sum = num::add(sum, num::matmul(tape_.constant(std::move(p)), w_pos_));
  }
  return num::sigmoid(sum);
}

Network::BlockOutput Network::attention_block(Var input, std::span<const std::uint8_t> mask,
                                              std::size_t layer, Channel channel) {
  const auto& cfg = params_.config;
  const auto& layers = channel == Channel::stc ? stc_layers_ : ltsc_layers_;
  if (layer >= layers.size()) throw std::out_of_range("attention_block: layer " + std::to_string(layer));
  const std::size_t n = input.shape().rows;
  if (n == 0) throw std::invalid_argument("attention_block: empty input");
  if (!mask.empty()) {
    if (mask.size() != n) throw std::invalid_argument("attention_block: mask length mismatch");
    if (std::none_of(mask.begin(), mask.end(), [](auto m) { return m != 0; })) {
      throw std::invalid_argument("attention_block: every row is masked");
    }
  }
  const auto& p = layers[layer];
  const double scale_dim = cfg.scale == ScaleMode::full_dim ? static_cast<double>(cfg.d)
                                                            : static_cast<double>(cfg.d / cfg.heads);
  const double s = 1.0 / std::sqrt(scale_dim);

  BlockOutput out;
  std::vector<Var> heads;
  for (const Var h : num::split_heads(input, cfg.heads)) {
    const Var scores = num::scale(num::matmul(h, num::transpose(h)), s);
    const Var weights = num::softmax_rows(scores, mask, mask);
    heads.push_back(num::matmul(weights, h));
    out.weights.push_back(weights);
  }
  const Var r = num::matmul(num::concat_cols(heads), p.attn);
  const Var g = num::layer_norm_rows(num::add(input, r), p.ln1_gain, p.ln1_bias);
  const Var f = num::matmul(num::relu(num::matmul(g, p.ff1)), p.ff2);
  out.outputs = num::layer_norm_rows(num::add(g, f), p.ln2_gain, p.ln2_bias);
  return out;
}

Var Network::candidate_repr(UserIdx user, std::span<const PoiIdx> candidates, Channel channel,
                            std::uint32_t position) {
  if (candidates.empty()) throw std::invalid_argument("candidate_repr: no candidates");
  const auto& cfg = params_.config;
  std::vector<std::size_t> rows;
  for (auto c : candidates) {
    if (c.get() >= params_.poi_count()) {
      throw std::out_of_range("unknown candidate POI index " + std::to_string(c.get()));
    }
    rows.push_back(c.get());
  }
  const auto& t = params_.trainable;
  const Var v = num::gather_rows(tape_, t.poi_table, grads_ ? &grads_->poi_table : nullptr, rows);
  const Var l = num::gather_rows(tape_, params_.location_table, nullptr, rows);
  const std::size_t bucket0 = 0;
  const Var t0 = num::gather_rows(tape_, t.time_table, grads_ ? &grads_->time_table : nullptr,
                                  std::span(&bucket0, 1));
  Var shared = num::add(num::matmul(user_vector(user), w_user_), num::matmul(t0, w_time_));
  if (channel == Channel::stc) {
    const Var p = tape_.constant(Tensor::row(position_encoding(position, cfg.d)));
    shared = num::add(shared, num::matmul(p, w_pos_));
  }
  const Var per_candidate = num::add(num::matmul(v, w_poi_), num::matmul(l, w_loc_));
  return num::sigmoid(num::add_row(per_candidate, shared));
}

std::pair<Var, Var> Network::vanilla_attention(const EncodedChannel& channel, Var candidates) {
  const auto& cfg = params_.config;
  if (channel.real == 0) throw std::invalid_argument("vanilla_attention: every position is masked");
  const Var scores = num::scale(num::matmul(candidates, num::transpose(channel.outputs)),
                                1.0 / std::sqrt(static_cast<double>(cfg.d)));
  const Var weights = num::softmax_rows(scores, channel.mask);
  Var h = num::matmul(weights, channel.outputs);
  if (cfg.mean_after_softmax) h = num::scale(h, 1.0 / static_cast<double>(channel.real));
  return {h, weights};
}

EncodedChannel Network::encode_channel(std::vector<CheckIn> checkins, Channel channel,
                                       Timestamp prediction_time, bool trace) {
  const auto& cfg = params_.config;
  EncodedChannel enc;
  enc.real = checkins.size();
  Var c = embed_checkins(checkins, channel, prediction_time);
  std::size_t rows = enc.real;
  if (cfg.pad_sequences) {
    rows = std::max(rows, channel == Channel::stc ? cfg.stc_len : cfg.ltsc_len);
    c = num::pad_rows(c, rows);
  }
  enc.mask.assign(rows, 0);
  std::fill(enc.mask.begin(), enc.mask.begin() + static_cast<std::ptrdiff_t>(enc.real), 1);
  for (std::size_t k = 0; k < cfg.layers; ++k) {
    auto block = attention_block(c, enc.mask, k, channel);
    c = block.outputs;
    if (trace) {
      std::vector<Tensor> per_head;
      for (const Var w : block.weights) per_head.push_back(top_left(w.value(), enc.real));
      enc.self_weights.push_back(std::move(per_head));
    }
  }
  enc.outputs = c;
  enc.checkins = std::move(checkins);
  return enc;
}

EncodedContext Network::encode(const TrainingInstance& instance, bool trace) {
  const auto& cfg = params_.config;
  EncodedContext ctx;
  ctx.user = instance.user;
  ctx.prediction_time = instance.prediction_time;
  if (uses_stc(cfg.variant) && !instance.stc.empty()) {
    const std::size_t keep = std::min(cfg.stc_len, instance.stc.size());
    std::vector<CheckIn> stc(instance.stc.end() - static_cast<std::ptrdiff_t>(keep), instance.stc.end());
    ctx.candidate_position = stc.back().position + 1;
    ctx.stc = encode_channel(std::move(stc), Channel::stc, instance.prediction_time, trace);
  }
  if (uses_ltsc(cfg.variant)) {
    auto ltsc = select_ltsc(instance.ltsc, instance.user, cfg.variant, cfg.ltsc_len);
    if (!ltsc.empty()) {
      ctx.ltsc = encode_channel(std::move(ltsc), Channel::ltsc, instance.prediction_time, trace);
    }
  }
  if (!ctx.stc && !ctx.ltsc) {
    throw std::invalid_argument("instance " + std::to_string(instance.id) + " has no check-ins usable by the " +
                                std::string(to_string(cfg.variant)) + " variant");
  }
  return ctx;
}

Var Network::score(const EncodedContext& context, std::span<const PoiIdx> candidates,
                   CandidateWeights* weights) {
  std::vector<std::size_t> rows;
  for (auto c : candidates) {
    if (c.get() >= params_.poi_count()) {
      throw std::out_of_range("unknown candidate POI index " + std::to_string(c.get()));
    }
    rows.push_back(c.get());
  }
  const Var v = num::gather_rows(tape_, params_.trainable.poi_table,
                                 grads_ ? &grads_->poi_table : nullptr, rows);
  Var total = num::matmul(v, num::transpose(user_vector(context.user)));
  if (context.stc) {
    const Var cv = candidate_repr(context.user, candidates, Channel::stc, context.candidate_position);
    const auto [h, w] = vanilla_attention(*context.stc, cv);
    total = num::add(total, row_dot(h, cv));
    if (weights) {
      weights->stc = Tensor(candidates.size(), context.stc->real);
      for (std::size_t i = 0; i < candidates.size(); ++i) {
        const auto r = first_columns(w.value(), i, context.stc->real);
        std::copy(r.begin(), r.end(), weights->stc.row_span(i).begin());
      }
    }
  }
  if (context.ltsc) {
    const Var cv = candidate_repr(context.user, candidates, Channel::ltsc, 0);
    const auto [h, w] = vanilla_attention(*context.ltsc, cv);
    total = num::add(total, row_dot(h, cv));
    if (weights) {
      weights->ltsc = Tensor(candidates.size(), context.ltsc->real);
      for (std::size_t i = 0; i < candidates.size(); ++i) {
        const auto r = first_columns(w.value(), i, context.ltsc->real);
        std::copy(r.begin(), r.end(), weights->ltsc.row_span(i).begin());
      }
    }
  }
  return total;
}

std::vector<double> score_candidates(const ModelParams& params, const TrainingInstance& instance,
                                     std::span<const PoiIdx> candidates) {
  num::Tape tape;
  Network net(tape, params);
  const auto ctx = net.encode(instance);
  const auto s = net.score(ctx, candidates).value();
  return {s.data().begin(), s.data().end()};
}

AttentionTrace trace_forward(const ModelParams& params, const TrainingInstance& instance,
                             PoiIdx candidate) {
  num::Tape tape;
  Network net(tape, params);
  const auto ctx = net.encode(instance, true);
  CandidateWeights w;
  const Var s = net.score(ctx, std::span(&candidate, 1), &w);

  AttentionTrace trace;
  trace.user = instance.user;
  trace.candidate = candidate;
  trace.prediction_time = instance.prediction_time;
  trace.score = s.value()[0];
  auto meta = [](const std::vector<CheckIn>& cs) {
    std::vector<TraceCheckIn> out;
    for (const auto& c : cs) out.push_back({c.user, c.poi, c.time, c.position});
    return out;
  };
  if (ctx.stc) {
    trace.stc = meta(ctx.stc->checkins);
    trace.stc_self = ctx.stc->self_weights;
    trace.stc_vanilla = first_columns(w.stc, 0, ctx.stc->real);
  }
  if (ctx.ltsc) {
    trace.ltsc = meta(ctx.ltsc->checkins);
    trace.ltsc_vanilla = first_columns(w.ltsc, 0, ctx.ltsc->real);
    trace.owners = group_by_owner(trace.ltsc, trace.ltsc_vanilla, instance.user);
  }
  return trace;
}

}  // namespace nextpoi::model
