#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "nextpoi/ingest.hpp"
#include "nextpoi/ops.hpp"
#include "nextpoi/tape.hpp"
#include "nextpoi/tensor.hpp"
#include "nextpoi/types.hpp"

namespace nextpoi::model {

using ingest::CheckIn;

enum class Variant { full, self_only, social_only, long_only, short_only };
enum class Channel { stc, ltsc };
/// Self-attention score scale: 1/sqrt(d) or 1/sqrt(d / heads).
enum class ScaleMode { full_dim, per_head };

std::string_view to_string(Variant v);
/// Accepts "full", "self-only", "social-only", "long-only", "short-only"
/// (underscores also accepted). Throws std::invalid_argument otherwise.
Variant parse_variant(std::string_view name);
std::string_view to_string(ScaleMode m);
ScaleMode parse_scale_mode(std::string_view name);

bool uses_stc(Variant v);
bool uses_ltsc(Variant v);

struct ModelConfig {
  std::size_t d = 256;
  std::size_t heads = 8;
  std::size_t layers = 6;
  std::size_t stc_len = 50;   // M
  std::size_t ltsc_len = 200; // L
  std::size_t time_buckets = 16;
  Variant variant = Variant::full;
  ScaleMode scale = ScaleMode::full_dim;
  /// Divide the vanilla-attention sum by the number of real positions.
  bool mean_after_softmax = true;
  /// Pad channels to M / L rows; padded rows are masked everywhere.
  bool pad_sequences = false;

  /// Throws std::invalid_argument: d % heads != 0, M > L, layers == 0, ...
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

/// 0 for [0, 1) hours, k + 1 for [2^k, 2^(k+1)), clamped to buckets - 1.
/// Throws std::invalid_argument for negative or non-finite input.
std::size_t time_bucket(double elapsed_hours, std::size_t buckets);

/// Sinusoidal encoding: [2i] = sin(p / 10000^(2i/d)), [2i+1] = cos(same).
std::vector<double> position_encoding(double position, std::size_t d);

struct LayerParams {
  num::Tensor attn;  // d x d, applied to the concatenated heads
  num::Tensor ff1, ff2;
  num::Tensor ln1_gain, ln1_bias, ln2_gain, ln2_bias;  // 1 x d
  bool operator==(const LayerParams&) const = default;
};

/// Everything the optimizer updates. Row-vector convention: x * W.
struct Trainable {
  num::Tensor w_user;  // user_dim x d
  num::Tensor w_poi;   // d x d
  num::Tensor w_loc;   // loc_dim x d
  num::Tensor w_time;  // d x d
  num::Tensor w_pos;   // d x d
  num::Tensor poi_table;   // |V| x d
  num::Tensor time_table;  // buckets x d
  std::vector<LayerParams> stc_layers;
  std::vector<LayerParams> ltsc_layers;

  /// Stable (name, tensor) listing in checkpoint order.
  std::vector<std::pair<std::string, num::Tensor*>> named();
  std::vector<std::pair<std::string, const num::Tensor*>> named() const;

  Trainable zeros_like() const;
  double squared_norm() const;
  bool all_finite() const;
  std::size_t parameter_count() const;
  void add_scaled(const Trainable& other, double s);
  bool operator==(const Trainable&) const = default;
};

struct ModelParams {
  ModelConfig config;
  Trainable trainable;
  num::Tensor user_table;      // frozen, |U| x d
  num::Tensor location_table;  // frozen, |V| x loc_dim

  std::size_t poi_count() const { return trainable.poi_table.rows(); }
  std::size_t user_count() const { return user_table.rows(); }
};

/// Xavier-uniform matrices, unit layer-norm gain, zero bias. The user table
/// width must equal config.d so that u . v is defined.
ModelParams init_params(const ModelConfig& config, num::Tensor user_table,
                        num::Tensor location_table, std::uint64_t seed);

/// One prediction context. ltsc holds candidate history; the variant decides
/// which part of it is used.
struct TrainingInstance {
  std::size_t id = 0;
  UserIdx user;
  std::vector<CheckIn> stc;   // trajectory prefix, chronological
  std::vector<CheckIn> ltsc;  // history of user and friends before prediction_time
  PoiIdx positive;
  std::vector<PoiIdx> negatives;
  Timestamp prediction_time;
};

/// Variant filter, canonical (time, user, poi) order, latest `limit` kept.
/// social_only falls back to the user's own history when friends have none.
std::vector<CheckIn> select_ltsc(std::span<const CheckIn> pool, UserIdx user, Variant variant,
                                 std::size_t limit);

/// Per-channel output of the attention stack.
struct EncodedChannel {
  num::Var outputs;  // rows x d; rows >= real
  num::Mask mask;
  std::size_t real = 0;
  std::vector<CheckIn> checkins;  // real rows, in row order
  /// [layer][head], real x real, filled when tracing.
  std::vector<std::vector<num::Tensor>> self_weights;
};

struct EncodedContext {
  UserIdx user;
  Timestamp prediction_time;
  std::optional<EncodedChannel> stc;
  std::optional<EncodedChannel> ltsc;
  std::uint32_t candidate_position = 1;
};

/// Vanilla-attention weights behind a batch of candidate scores.
struct CandidateWeights {
  num::Tensor stc;   // candidates x real
  num::Tensor ltsc;  // candidates x real
};

/// Binds parameters to a tape. With `grads` set, gradients of trainable
/// tensors flow into it on backward; frozen tables never receive gradient.
class Network {
 public:
  Network(num::Tape& tape, const ModelParams& params, Trainable* grads = nullptr);

  const ModelConfig& config() const { return params_.config; }
  num::Tape& tape() const { return tape_; }

  /// Rows = sigmoid(U Wu + V Wv + L Wl + T Wt [+ P Wp for the STC]).
  /// Time buckets are measured back from prediction_time.
  num::Var embed_checkins(std::span<const CheckIn> checkins, Channel channel,
                          Timestamp prediction_time);

  struct BlockOutput {
    num::Var outputs;
    std::vector<num::Var> weights;  // one rows x rows matrix per head
  };
  /// Multi-head self-attention, residual + layer norm, feed-forward,
  /// residual + layer norm. Masked rows neither give nor receive attention.
  BlockOutput attention_block(num::Var input, std::span<const std::uint8_t> mask, std::size_t layer,
                              Channel channel);

  /// Candidate rows with time bucket 0 and, for the STC, the given position.
  num::Var candidate_repr(UserIdx user, std::span<const PoiIdx> candidates, Channel channel,
                          std::uint32_t position);

  /// h = (1/real) * softmax(c_v C^T / sqrt(d)) C per candidate row.
  /// Returns (h: candidates x d, weights: candidates x rows).
  std::pair<num::Var, num::Var> vanilla_attention(const EncodedChannel& channel, num::Var candidates);

  EncodedContext encode(const TrainingInstance& instance, bool trace = false);

  /// Scores as a candidates x 1 column: h_s . c_s + h_l . c_l + u . v.
  num::Var score(const EncodedContext& context, std::span<const PoiIdx> candidates,
                 CandidateWeights* weights = nullptr);

  num::Var user_vector(UserIdx user);

 private:
  struct BoundLayer {
    num::Var attn, ff1, ff2, ln1_gain, ln1_bias, ln2_gain, ln2_bias;
  };

  num::Var bind(const num::Tensor& value, num::Tensor* sink);
  EncodedChannel encode_channel(std::vector<CheckIn> checkins, Channel channel,
                                Timestamp prediction_time, bool trace);

  num::Tape& tape_;
  const ModelParams& params_;
  Trainable* grads_;
  num::Var w_user_, w_poi_, w_loc_, w_time_, w_pos_;
  std::vector<BoundLayer> stc_layers_, ltsc_layers_;
};

/// Forward-only scores of `candidates` for one instance.
std::vector<double> score_candidates(const ModelParams& params, const TrainingInstance& instance,
                                     std::span<const PoiIdx> candidates);

struct TraceCheckIn {
  UserIdx user;
  PoiIdx poi;
  Timestamp time;
  std::uint32_t position = 0;
  bool operator==(const TraceCheckIn&) const = default;
};

struct OwnerWeights {
  UserIdx owner;
  bool is_friend = false;
  std::vector<double> weights;  // that owner's LTSC check-ins, in trace order
  double mean = 0.0;
  bool operator==(const OwnerWeights&) const = default;
};

/// Attention behind one (instance, candidate) score.
struct AttentionTrace {
  UserIdx user;
  PoiIdx candidate;
  Timestamp prediction_time;
  double score = 0.0;
  std::vector<TraceCheckIn> stc;
  std::vector<std::vector<num::Tensor>> stc_self;  // [layer][head], stc x stc
  std::vector<double> stc_vanilla;
  std::vector<TraceCheckIn> ltsc;
  std::vector<double> ltsc_vanilla;
  std::vector<OwnerWeights> owners;  // ascending owner index
  bool operator==(const AttentionTrace&) const = default;
};

AttentionTrace trace_forward(const ModelParams& params, const TrainingInstance& instance,
                             PoiIdx candidate);

/// Groups LTSC weights by owner and averages them.
std::vector<OwnerWeights> group_by_owner(std::span<const TraceCheckIn> checkins,
                                         std::span<const double> weights, UserIdx user);

/// JSON document:
///   format "nextpoi-trace", user, candidate, prediction_time (unix seconds), score,
///   stc: {checkins: [{user, poi, time, position}], self_attention: [layer][head][row][col],
///         vanilla: [...]},
///   ltsc: {checkins: [...], vanilla: [...],
///          owners: [{user, friend, weights, mean}]}
/// Doubles round-trip exactly.
std::string export_trace(const AttentionTrace& trace);
AttentionTrace parse_trace(std::string_view text);

/// Paths of the frozen tables a checkpoint depends on.
struct FrozenRefs {
  std::string user_embedding;
  std::string location_embedding;
};

/// JSON container: format "nextpoi-checkpoint", config, step, frozen refs,
/// and tensors as {name: {rows, cols, data}}. Frozen tables are not copied.
void write_checkpoint(const ModelParams& params, const FrozenRefs& refs, std::uint64_t step,
                      std::ostream& out);

struct Checkpoint {
  ModelConfig config;
  Trainable trainable;
  FrozenRefs refs;
  std::uint64_t step = 0;
};
Checkpoint read_checkpoint(std::istream& in);

/// Loads the referenced embedding files (relative paths resolve against
/// `base_dir`) and validates every tensor shape.
ModelParams load_model(const Checkpoint& checkpoint, const std::string& base_dir);

}  // namespace nextpoi::model
