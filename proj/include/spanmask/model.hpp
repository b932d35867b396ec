// Copyright 2026 The spanmask Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SPANMASK_MODEL_HPP
#define SPANMASK_MODEL_HPP

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "spanmask/corpus.hpp"
#include "spanmask/masking.hpp"
#include "spanmask/schema.hpp"

namespace spanmask {

// Trainable transformer encoder with span/relation classifiers and an MLM
// head. Everything runs in 64-bit floats.

struct EncoderConfig {
  int layers = 2;
  int heads = 2;
  int hidden_dim = 64;
  int ffn_dim = 256;
  int max_seq_len = 128;
  int vocab_size = 0;
  int max_span_width = kDefaultMaxSpanWidth;  // span-size embedding table size
  int size_embedding_dim = 16;
  int num_labels = kNumMergedLabels;
  double dropout = 0.1;
  bool layer_norm = true;

  int head_dim() const { return hidden_dim / heads; }
  int span_repr_dim() const { return 2 * hidden_dim + size_embedding_dim; }
  int pair_repr_dim() const { return 2 * span_repr_dim() + hidden_dim; }

  void check() const;

  static EncoderConfig desk_scale(int vocab_size);
  // The full-scale reference configuration (12 layers, 12 heads, 512-long
  // sequences). Recorded for completeness; not exercised by the test suite.
  static EncoderConfig full_scale(int vocab_size);
};

// All learnable tensors in one flat arena so that optimizer steps,
// serialization and finite-difference probing can treat the model as a
// single parameter vector. Tensor registration order is the on-disk order.
class TensorStore {
 public:
  using Map = Eigen::Map<Eigen::MatrixXd>;
  using ConstMap = Eigen::Map<const Eigen::MatrixXd>;

  int add(std::string name, int rows, int cols);
  void allocate() { data_.assign(total_, 0.0); }

  Map t(int handle);
  ConstMap t(int handle) const;
  const std::string& name(int handle) const { return tensors_[handle].name; }
  int count() const { return static_cast<int>(tensors_.size()); }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }
  std::size_t size() const { return total_; }

  TensorStore zeros_like() const;
  void accumulate(const TensorStore& other);  // elementwise +=
  void set_zero() { std::fill(data_.begin(), data_.end(), 0.0); }

 private:
  struct TensorInfo {
    std::string name;
    std::size_t offset;
    int rows, cols;
  };
  std::vector<TensorInfo> tensors_;
  std::vector<double> data_;
  std::size_t total_ = 0;
};

struct LayerHandles {
  int wq, bq, wk, bk, wv, bv, wo, bo;
  int ln1_gamma, ln1_beta;
  int w1, b1, w2, b2;
  int ln2_gamma, ln2_beta;
};

struct ParamLayout {
  int token_embedding = -1;
  int position_embedding = -1;
  std::vector<LayerHandles> layers;
  int size_embedding = -1;
  int entity_w = -1, entity_b = -1;
  int relation_w = -1, relation_b = -1;
  int lm_w = -1, lm_b = -1;
};

struct ModelParams {
  EncoderConfig config;
  ParamLayout layout;
  TensorStore store;

  static ModelParams init(const EncoderConfig& config, std::uint64_t seed);
  // Shapes only, all zeros.
  static ModelParams zeros(const EncoderConfig& config);

  void save(const std::string& path) const;
  static ModelParams load(const std::string& path);
};

std::uint64_t params_hash(const ModelParams& params);

// --- forward pass -----------------------------------------------------------

// Dropout draws are addressed by (key, site, row, col) so a forward pass is a
// pure function of its key; inactive in eval mode.
struct DropoutContext {
  bool active = false;
  double rate = 0.0;
  std::uint64_t key = 0;
};

struct Encoded {
  Eigen::MatrixXd hidden;    // one row per input position, includes row 0
  Eigen::VectorXd context;   // encoding of the sentence-start token
};

// Deterministic eval-mode encoding. ids[0] must be the sentence-start (or
// other sequence-initial) token. Throws on sequences longer than max_seq_len.
Encoded encode(const ModelParams& params, const std::vector<int>& ids);

// Span/pair representations take sentence-token coordinates; `hidden` is the
// encoder output whose row 0 is the sentence-start position.
Eigen::VectorXd span_representation(const ModelParams& params,
                                    const Eigen::MatrixXd& hidden,
                                    const TokenSpan& span);
Eigen::VectorXd pair_representation(const ModelParams& params,
                                    const Eigen::MatrixXd& hidden,
                                    const TokenSpan& trigger,
                                    const TokenSpan& argument);

// Softmax distribution over the merged entity label space.
Eigen::VectorXd classify_entity(const ModelParams& params,
                                const Eigen::VectorXd& span_repr);
// Link probability for a (trigger, argument) pair.
double classify_relation(const ModelParams& params,
                         const Eigen::VectorXd& pair_repr);

// --- training samples -------------------------------------------------------

struct SpanSample {
  TokenSpan span;
  int label = kLabelNegative;
};

struct PairSample {
  TokenSpan trigger;
  TokenSpan argument;
  bool linked = false;
};

struct SentenceInstance {
  std::vector<int> ids;  // [CLS] + sentence token ids
  std::uint64_t uid = 0;
  std::vector<SpanSample> spans;
  std::vector<PairSample> pairs;
};

struct MlmInstance {
  std::vector<int> ids;  // sequence with [MASK] substitutions applied
  std::vector<int> masked_positions;
  std::vector<int> original_ids;
  std::uint64_t uid = 0;
};

struct NegativeSamples {
  std::vector<TokenSpan> spans;
  std::vector<std::pair<int, int>> pairs;  // indices into merged entities
};

// Uniform samples without replacement (seeded Fisher-Yates over the pools in
// canonical order): spans not covering a gold entity span, and
// (trigger, argument) pairs of gold merged entities without a gold relation.
NegativeSamples sample_negatives(int sentence_length,
                                 const MergedAnnotation& gold, int n_entities,
                                 int n_relations, int max_span_width,
                                 std::uint64_t seed);

// --- losses -----------------------------------------------------------------

struct JointLossBreakdown {
  double entity = 0.0;
  double relation = 0.0;
  double joint() const { return entity + relation; }
};

// Sum of entity cross-entropy and relation binary cross-entropy terms over
// the batch (eval mode, no dropout).
JointLossBreakdown joint_loss(const ModelParams& params,
                              const std::vector<SentenceInstance>& batch);

// Sum of masked-position cross-entropy terms over the batch.
double mlm_loss(const ModelParams& params,
                const std::vector<MlmInstance>& batch);

// Backpropagating variants; gradients are accumulated into `grads`.
JointLossBreakdown joint_loss_backward(const ModelParams& params,
                                       const SentenceInstance& instance,
                                       const DropoutContext& dropout,
                                       TensorStore* grads);
double mlm_loss_backward(const ModelParams& params,
                         const MlmInstance& instance,
                         const DropoutContext& dropout, TensorStore* grads);

// --- optimization -----------------------------------------------------------

class AdamOptimizer {
 public:
  // Linear warmup over the first warmup_steps steps, constant lr afterwards.
  AdamOptimizer(std::size_t n, double lr, int warmup_steps = 0,
                double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step(std::vector<double>& params, const std::vector<double>& grads);

 private:
  double lr_, beta1_, beta2_, eps_;
  int warmup_steps_;
  int t_ = 0;
  std::vector<double> m_, v_;
};

struct TrainConfig {
  int epochs = 10;
  int batch_size = 15;
  double learning_rate = 1e-3;
  int warmup_steps = 0;
  int negative_spans = 100;
  int negative_pairs = 100;
  double mask_rate = 0.8;  // applied only when a phrase list is supplied
  int threads = 1;
  std::uint64_t seed = 1;
};

struct EpochMetrics {
  int epoch = 0;
  double entity_loss = 0.0;    // epoch mean per sentence
  double relation_loss = 0.0;
  double joint() const { return entity_loss + relation_loss; }
};

struct TrainResult {
  ModelParams params;
  std::vector<EpochMetrics> metrics;
};

// Joint training on the merged label space. When `phrases` is non-null the
// corpus is re-masked every epoch at cfg.mask_rate with the epoch index in
// the key. Aborts with a diagnostic if the loss turns non-finite.
TrainResult train(const Corpus& corpus, const Vocab& vocab,
                  const EncoderConfig& encoder_config, const TrainConfig& cfg,
                  const PhraseList* phrases = nullptr,
                  const ModelParams* initial = nullptr);

struct PretrainConfig {
  int epochs = 3;
  int sub_batch_size = 16;
  int accumulation_steps = 1;  // optimizer step every N sub-batches
  double learning_rate = 1e-3;
  double mlm_rate = 0.15;
  int chunk_len = 64;
  int threads = 1;
  std::uint64_t seed = 1;
};

struct PretrainEpochMetrics {
  int epoch = 0;
  double mlm_loss = 0.0;  // epoch mean per masked position
  long long masked_positions = 0;
};

struct PretrainResult {
  ModelParams params;
  std::vector<PretrainEpochMetrics> metrics;
};

// Splits a token-id stream into consecutive chunks of at most chunk_len.
std::vector<std::vector<int>> chunk_tokens(const std::vector<int>& ids,
                                           int chunk_len);

// MLM pretraining over domain-tagged unlabeled documents: each document's
// token stream is chunked, every chunk is prefixed with [CLS] and its domain
// indicator token, masked at cfg.mlm_rate and optimized under the MLM loss.
PretrainResult pretrain_adaptive(const Corpus& unlabeled, const Vocab& vocab,
                                 const EncoderConfig& encoder_config,
                                 const PretrainConfig& cfg);

// Builds the per-sentence training instances for one epoch (masking already
// applied to `corpus`); exposed for tests.
std::vector<SentenceInstance> build_instances(const Corpus& corpus,
                                              const Vocab& vocab,
                                              const EncoderConfig& enc,
                                              const TrainConfig& cfg,
                                              int epoch);

// --- gradient checking ------------------------------------------------------

struct GradCheckResult {
  double max_rel_error = 0.0;
  int checked = 0;
};

// Central finite differences on `n_params` randomly selected parameters
// against the analytic gradient. Relative error uses
// |ga - gn| / max(|ga| + |gn|, 1e-4) to stay meaningful under
// finite-difference round-off for near-zero gradients.
GradCheckResult gradient_check_joint(const ModelParams& params,
                                     const std::vector<SentenceInstance>& batch,
                                     double epsilon, int n_params,
                                     std::uint64_t seed);
GradCheckResult gradient_check_mlm(const ModelParams& params,
                                   const std::vector<MlmInstance>& batch,
                                   double epsilon, int n_params,
                                   std::uint64_t seed);

// --- misc -------------------------------------------------------------------

void write_train_metrics_csv(const std::string& path,
                             const std::vector<EpochMetrics>& metrics);
void write_pretrain_metrics_csv(const std::string& path,
                                const std::vector<PretrainEpochMetrics>& metrics);

// Runs fn(i) for i in [0, n) on up to `threads` workers; results must be
// written to disjoint slots so the outcome is independent of scheduling.
void parallel_for(int n, int threads, const std::function<void(int)>& fn);

// Parallelism cap from SPANMASK_THREADS (defaults to 1).
int env_threads();

}  // namespace spanmask

#endif  // SPANMASK_MODEL_HPP
