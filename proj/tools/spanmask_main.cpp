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
//
// Command-line driver wiring corpus generation, vocabulary and phrase-list
// construction, MLM pretraining, joint training with dynamic trigger
// masking, prediction, scoring, binned evaluation, multi-seed significance
// testing and domain-shift analysis.

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "spanmask/analysis.hpp"
#include "spanmask/corpus.hpp"
#include "spanmask/decode.hpp"
#include "spanmask/eval.hpp"
#include "spanmask/masking.hpp"
#include "spanmask/model.hpp"
#include "spanmask/rng.hpp"
#include "spanmask/schema.hpp"
#include "spanmask/stats.hpp"
#include "spanmask/synthgen.hpp"

namespace fs = std::filesystem;
using namespace spanmask;

namespace {

struct EncoderFlags {
  int layers = 2;
  int heads = 2;
  int hidden_dim = 64;
  int ffn_dim = 256;
  int max_seq_len = 128;
  int span_width = kDefaultMaxSpanWidth;
  int size_emb_dim = 16;
  double dropout = 0.1;
  bool no_layer_norm = false;

  EncoderConfig to_config(int vocab_size) const {
    EncoderConfig c;
    c.layers = layers;
    c.heads = heads;
    c.hidden_dim = hidden_dim;
    c.ffn_dim = ffn_dim;
    c.max_seq_len = max_seq_len;
    c.max_span_width = span_width;
    c.size_embedding_dim = size_emb_dim;
    c.dropout = dropout;
    c.layer_norm = !no_layer_norm;
    c.vocab_size = vocab_size;
    return c;
  }
};

void add_encoder_flags(CLI::App* cmd, EncoderFlags* flags) {
  cmd->add_option("--layers", flags->layers, "Encoder layers");
  cmd->add_option("--heads", flags->heads, "Attention heads");
  cmd->add_option("--hidden-dim", flags->hidden_dim, "Hidden dimension");
  cmd->add_option("--ffn-dim", flags->ffn_dim, "Feed-forward dimension");
  cmd->add_option("--max-seq-len", flags->max_seq_len, "Max sequence length");
  cmd->add_option("--span-width", flags->span_width, "Max span width");
  cmd->add_option("--size-emb-dim", flags->size_emb_dim,
                  "Span size embedding dimension");
  cmd->add_option("--dropout", flags->dropout, "Dropout rate");
  cmd->add_flag("--no-layer-norm", flags->no_layer_norm,
                "Disable layer normalization");
}

Corpus load_many(const std::vector<std::string>& labeled,
                 const std::vector<std::string>& unlabeled) {
  Corpus all;
  for (const auto& path : labeled) {
    Corpus c = load_corpus(path);
    for (auto& d : c.documents) all.documents.push_back(std::move(d));
  }
  for (const auto& path : unlabeled) {
    Corpus c = load_plain_corpus(path);
    for (auto& d : c.documents) all.documents.push_back(std::move(d));
  }
  return all;
}

int run(int argc, char** argv) {
  CLI::App app{"spanmask: cross-domain symptom event extraction toolkit"};
  app.set_config("--config", "", "Read options from an INI file");
  app.require_subcommand(1);

  // ---- gen-data -------------------------------------------------------------
  auto* gen = app.add_subcommand(
      "gen-data", "Generate synthetic domain-shift corpora");
  std::string gen_preset;
  std::string gen_spec, gen_source_spec, gen_target_spec;
  std::string gen_out_dir = ".";
  int gen_train = 500, gen_test = 300, gen_unlabeled = 400;
  std::uint64_t gen_seed = 0;
  gen->add_option("--preset", gen_preset, "Shipped shift pair: near or far");
  gen->add_option("--spec", gen_spec, "Single domain spec JSON");
  gen->add_option("--source-spec", gen_source_spec, "Source domain spec JSON");
  gen->add_option("--target-spec", gen_target_spec, "Target domain spec JSON");
  gen->add_option("--out-dir", gen_out_dir, "Output directory");
  gen->add_option("--n-train", gen_train, "Labeled source sentences");
  gen->add_option("--n-test", gen_test, "Labeled target sentences");
  gen->add_option("--n-unlabeled", gen_unlabeled,
                  "Unlabeled documents per domain");
  gen->add_option("--seed", gen_seed, "Overrides the spec seeds when nonzero");

  // ---- build-vocab ----------------------------------------------------------
  auto* bv = app.add_subcommand("build-vocab", "Build a vocabulary file");
  std::vector<std::string> bv_in, bv_unlabeled;
  int bv_max_size = 4000;
  std::string bv_out;
  bv->add_option("--in", bv_in, "Annotated JSONL corpora");
  bv->add_option("--unlabeled", bv_unlabeled, "Plain-text corpora");
  bv->add_option("--max-size", bv_max_size, "Vocabulary size cap");
  bv->add_option("--out", bv_out, "Output vocab file")->required();

  // ---- build-freq-list --------------------------------------------------------
  auto* bf = app.add_subcommand("build-freq-list",
                                "Rank frequent trigger phrases");
  std::string bf_in, bf_out;
  int bf_top_k = 200;
  bool bf_union = false;
  bf->add_option("--in", bf_in, "Annotated source corpus")->required();
  bf->add_option("--top-k", bf_top_k, "Rank cutoff before filtering");
  bf->add_flag("--per-domain-union", bf_union,
               "Union per-domain top-k lists instead of pooled counts");
  bf->add_option("--out", bf_out, "Output TSV")->required();

  // ---- pretrain ---------------------------------------------------------------
  auto* pt = app.add_subcommand("pretrain", "Adaptive MLM pretraining");
  std::vector<std::string> pt_unlabeled;
  std::string pt_vocab, pt_out, pt_metrics;
  EncoderFlags pt_enc;
  PretrainConfig pt_cfg;
  pt_cfg.threads = env_threads();
  pt->add_option("--unlabeled", pt_unlabeled, "Plain-text corpora")->required();
  pt->add_option("--vocab", pt_vocab, "Vocabulary file")->required();
  pt->add_option("--out", pt_out, "Output checkpoint")->required();
  pt->add_option("--metrics", pt_metrics, "Per-epoch loss CSV");
  pt->add_option("--epochs", pt_cfg.epochs, "Pretraining epochs");
  pt->add_option("--mlm-rate", pt_cfg.mlm_rate, "MLM masking rate");
  pt->add_option("--chunk-len", pt_cfg.chunk_len, "Token chunk length");
  pt->add_option("--sub-batch-size", pt_cfg.sub_batch_size, "Sub-batch size");
  pt->add_option("--accumulation-steps", pt_cfg.accumulation_steps,
                 "Gradient accumulation steps");
  pt->add_option("--lr", pt_cfg.learning_rate, "Learning rate");
  pt->add_option("--seed", pt_cfg.seed, "Random seed");
  pt->add_option("--threads", pt_cfg.threads, "Worker threads");
  add_encoder_flags(pt, &pt_enc);

  // ---- train -------------------------------------------------------------------
  auto* tr = app.add_subcommand("train", "Joint entity/relation training");
  std::string tr_in, tr_vocab, tr_init, tr_freq, tr_out, tr_metrics;
  EncoderFlags tr_enc;
  TrainConfig tr_cfg;
  tr_cfg.threads = env_threads();
  tr->add_option("--in", tr_in, "Annotated training corpus")->required();
  tr->add_option("--vocab", tr_vocab, "Vocabulary file")->required();
  tr->add_option("--init", tr_init, "Initial checkpoint (pretrained)");
  tr->add_option("--freq-list", tr_freq,
                 "Phrase list TSV enabling dynamic masking");
  tr->add_option("--mask-rate", tr_cfg.mask_rate, "Dynamic masking rate");
  tr->add_option("--out", tr_out, "Output checkpoint")->required();
  tr->add_option("--metrics", tr_metrics, "Per-epoch loss CSV");
  tr->add_option("--epochs", tr_cfg.epochs, "Training epochs");
  tr->add_option("--batch-size", tr_cfg.batch_size, "Batch size");
  tr->add_option("--lr", tr_cfg.learning_rate, "Learning rate");
  tr->add_option("--warmup-steps", tr_cfg.warmup_steps,
                 "Linear learning-rate warmup steps");
  tr->add_option("--neg-spans", tr_cfg.negative_spans,
                 "Negative spans per sentence");
  tr->add_option("--neg-pairs", tr_cfg.negative_pairs,
                 "Negative pairs per sentence");
  tr->add_option("--seed", tr_cfg.seed, "Random seed");
  tr->add_option("--threads", tr_cfg.threads, "Worker threads");
  add_encoder_flags(tr, &tr_enc);

  // ---- predict --------------------------------------------------------------------
  auto* pr = app.add_subcommand("predict", "Predict entities and relations");
  std::string pr_model, pr_vocab, pr_in, pr_out;
  double pr_threshold = 0.5;
  int pr_threads = env_threads();
  pr->add_option("--model", pr_model, "Checkpoint")->required();
  pr->add_option("--vocab", pr_vocab, "Vocabulary file")->required();
  pr->add_option("--in", pr_in, "Input corpus JSONL")->required();
  pr->add_option("--out", pr_out, "Predictions JSONL")->required();
  pr->add_option("--rel-threshold", pr_threshold, "Relation threshold");
  pr->add_option("--threads", pr_threads, "Worker threads");

  // ---- evaluate ----------------------------------------------------------------------
  auto* ev = app.add_subcommand("evaluate", "Score predictions against gold");
  std::string ev_gold, ev_pred, ev_out;
  int ev_seed_id = -1;
  bool ev_no_normalize = false;
  ev->add_option("--gold", ev_gold, "Gold corpus JSONL")->required();
  ev->add_option("--pred", ev_pred, "Predictions JSONL")->required();
  ev->add_option("--out", ev_out, "Report CSV");
  ev->add_option("--seed-id", ev_seed_id, "Seed id recorded in the report");
  ev->add_flag("--no-normalize-gold", ev_no_normalize,
               "Skip restating gold Assertion spans on trigger spans");

  // ---- bin-eval -------------------------------------------------------------------------
  auto* be = app.add_subcommand(
      "bin-eval", "Trigger scores per source-frequency rank bin");
  std::string be_gold, be_pred, be_freq, be_out;
  std::vector<int> be_edges = {0, 20, 40, 60, 80, 100};
  int be_seed_id = -1;
  be->add_option("--gold", be_gold, "Gold corpus JSONL")->required();
  be->add_option("--pred", be_pred, "Predictions JSONL")->required();
  be->add_option("--freq-list", be_freq, "Source phrase list TSV")->required();
  be->add_option("--edges", be_edges, "Ascending rank bin edges");
  be->add_option("--out", be_out, "Report CSV");
  be->add_option("--seed-id", be_seed_id, "Seed id recorded in the report");

  // ---- compare-seeds -----------------------------------------------------------------------
  auto* cs = app.add_subcommand(
      "compare-seeds", "Two-sided t-test over per-seed report directories");
  std::string cs_dir_a, cs_dir_b, cs_metric = "trigger_f1";
  bool cs_pooled = false;
  cs->add_option("dir_a", cs_dir_a, "Directory of per-seed report CSVs")
      ->required();
  cs->add_option("dir_b", cs_dir_b, "Directory of per-seed report CSVs")
      ->required();
  cs->add_option("--metric", cs_metric, "Metric, e.g. trigger_f1");
  cs->add_flag("--pooled", cs_pooled, "Pooled-variance test instead of Welch");

  // ---- analyze-coverage -----------------------------------------------------------------------
  auto* ac = app.add_subcommand("analyze-coverage",
                                "Source/target trigger coverage curves");
  std::string ac_source, ac_target, ac_csv, ac_svg;
  int ac_top_n = 100;
  ac->add_option("--source", ac_source, "Source corpus JSONL")->required();
  ac->add_option("--target", ac_target, "Target corpus JSONL")->required();
  ac->add_option("--top-n", ac_top_n, "Curve length");
  ac->add_option("--out-csv", ac_csv, "Coverage CSV");
  ac->add_option("--out-svg", ac_svg, "Coverage SVG");

  // ---- analyze-scatter ---------------------------------------------------------------------------
  auto* as = app.add_subcommand(
      "analyze-scatter",
      "Positive-class-ratio scatter with false-negative changes");
  std::string as_source, as_target, as_gold, as_base, as_masked, as_csv, as_svg;
  int as_top_n = 100;
  as->add_option("--source", as_source, "Source (training) corpus")->required();
  as->add_option("--target", as_target, "Target (test) corpus")->required();
  as->add_option("--gold", as_gold,
                 "Gold corpus scored by both prediction sets (defaults to --target)");
  as->add_option("--pred-baseline", as_base, "Unmasked predictions")->required();
  as->add_option("--pred-masked", as_masked, "Masked-model predictions")
      ->required();
  as->add_option("--top-n", as_top_n, "Tracked phrases");
  as->add_option("--out-csv", as_csv, "Scatter CSV");
  as->add_option("--out-svg", as_svg, "Scatter SVG");

  CLI11_PARSE(app, argc, argv);

  if (gen->parsed()) {
    fs::create_directories(gen_out_dir);
    const fs::path dir(gen_out_dir);
    if (!gen_spec.empty()) {
      DomainSpec spec = load_domain_spec(gen_spec);
      if (gen_seed != 0) spec.seed = gen_seed;
      auto domain = generate_domain(spec, gen_train, gen_unlabeled);
      save_corpus(domain.labeled, (dir / "corpus.jsonl").string());
      save_plain_corpus(domain.unlabeled, (dir / "unlabeled.txt").string());
      std::cout << "wrote " << domain.labeled.num_sentences()
                << " labeled sentences to " << (dir / "corpus.jsonl").string()
                << "\n";
      return 0;
    }
    DomainSpec source, target;
    if (!gen_preset.empty()) {
      if (gen_preset == "near") {
        source = near_source_spec();
        target = near_target_spec();
      } else if (gen_preset == "far") {
        source = far_source_spec();
        target = far_target_spec();
      } else {
        throw std::runtime_error("unknown preset '" + gen_preset +
                                 "' (expected near or far)");
      }
    } else if (!gen_source_spec.empty() && !gen_target_spec.empty()) {
      source = load_domain_spec(gen_source_spec);
      target = load_domain_spec(gen_target_spec);
    } else {
      throw std::runtime_error(
          "gen-data needs --preset, --spec, or --source-spec/--target-spec");
    }
    if (gen_seed != 0) {
      source.seed = rng::combine(gen_seed, rng::fnv1a("source"));
      target.seed = rng::combine(gen_seed, rng::fnv1a("target"));
    }
    auto pair = make_shift_pair(source, target, gen_train, gen_test,
                                gen_unlabeled);
    save_domain_spec(source, (dir / "source_spec.json").string());
    save_domain_spec(target, (dir / "target_spec.json").string());
    save_corpus(pair.source.labeled, (dir / "source_train.jsonl").string());
    save_corpus(pair.target.labeled, (dir / "target_test.jsonl").string());
    save_plain_corpus(pair.source.unlabeled,
                      (dir / "source_unlabeled.txt").string());
    save_plain_corpus(pair.target.unlabeled,
                      (dir / "target_unlabeled.txt").string());
    std::ofstream summary(dir / "shift_summary.csv");
    summary << "lexicon_jaccard,target_coverage_at_100,mean_ratio_gap\n";
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%.6f,%.6f,%.6f\n",
                  pair.summary.lexicon_jaccard,
                  pair.summary.target_coverage_at_100,
                  pair.summary.mean_ratio_gap);
    summary << buf;
    std::cout << "lexicon overlap " << pair.summary.lexicon_jaccard
              << ", target coverage@100 " << pair.summary.target_coverage_at_100
              << ", mean ratio gap " << pair.summary.mean_ratio_gap << "\n";
    return 0;
  }

  if (bv->parsed()) {
    if (bv_in.empty() && bv_unlabeled.empty()) {
      throw std::runtime_error("build-vocab needs --in and/or --unlabeled");
    }
    Corpus all = load_many(bv_in, bv_unlabeled);
    Vocab vocab = Vocab::build({&all}, bv_max_size);
    vocab.save(bv_out);
    std::cout << "vocab size " << vocab.size() << " (" << vocab.num_reserved()
              << " reserved) -> " << bv_out << "\n";
    return 0;
  }

  if (bf->parsed()) {
    Corpus corpus = load_corpus(bf_in);
    PhraseList list = build_frequency_list(
        corpus, bf_top_k,
        bf_union ? FrequencyListMode::kPerDomainUnion
                 : FrequencyListMode::kPooled);
    list.save(bf_out);
    std::cout << "kept " << list.phrases.size() << " phrases -> " << bf_out
              << "\n";
    return 0;
  }

  if (pt->parsed()) {
    Corpus unlabeled = load_many({}, pt_unlabeled);
    Vocab vocab = Vocab::load(pt_vocab);
    apply_vocab(unlabeled, vocab);
    EncoderConfig enc = pt_enc.to_config(vocab.size());
    PretrainResult result = pretrain_adaptive(unlabeled, vocab, enc, pt_cfg);
    result.params.save(pt_out);
    if (!pt_metrics.empty()) {
      write_pretrain_metrics_csv(pt_metrics, result.metrics);
    }
    for (const auto& m : result.metrics) {
      std::cout << "epoch " << m.epoch << " mlm_loss " << m.mlm_loss << " ("
                << m.masked_positions << " masked)\n";
    }
    return 0;
  }

  if (tr->parsed()) {
    Corpus corpus = load_corpus(tr_in);
    Vocab vocab = Vocab::load(tr_vocab);
    apply_vocab(corpus, vocab);
    EncoderConfig enc = tr_enc.to_config(vocab.size());

    std::optional<ModelParams> init;
    if (!tr_init.empty()) {
      init = ModelParams::load(tr_init);
      enc = init->config;
    }
    std::optional<PhraseList> phrases;
    if (!tr_freq.empty()) phrases = PhraseList::load(tr_freq);

    TrainResult result =
        train(corpus, vocab, enc, tr_cfg, phrases ? &*phrases : nullptr,
              init ? &*init : nullptr);
    result.params.save(tr_out);
    if (!tr_metrics.empty()) write_train_metrics_csv(tr_metrics, result.metrics);
    for (const auto& m : result.metrics) {
      std::cout << "epoch " << m.epoch << " entity " << m.entity_loss
                << " relation " << m.relation_loss << " joint " << m.joint()
                << "\n";
    }
    return 0;
  }

  if (pr->parsed()) {
    ModelParams params = ModelParams::load(pr_model);
    Vocab vocab = Vocab::load(pr_vocab);
    Corpus corpus = load_corpus(pr_in);
    apply_vocab(corpus, vocab);
    DecodeThresholds thresholds;
    thresholds.relation = pr_threshold;
    Corpus preds = predict_corpus(params, vocab, corpus, thresholds, pr_threads);
    save_corpus(preds, pr_out);
    std::cout << "predicted " << preds.num_sentences() << " sentences -> "
              << pr_out << "\n";
    return 0;
  }

  if (ev->parsed()) {
    Corpus gold = load_corpus(ev_gold);
    Corpus pred = load_corpus(ev_pred);
    if (!ev_no_normalize) gold = normalize_assertions(gold);
    std::vector<ScoreRow> rows = full_report(gold, pred);
    for (auto& r : rows) r.seed = ev_seed_id;
    std::cout << render_report_table(rows);
    if (!ev_out.empty()) write_report_csv(ev_out, rows);
    return 0;
  }

  if (be->parsed()) {
    Corpus gold = load_corpus(be_gold);
    Corpus pred = load_corpus(be_pred);
    PhraseList list = PhraseList::load(be_freq);
    auto bins = binned_eval(gold, pred, list, be_edges);
    std::vector<ScoreRow> rows;
    for (std::size_t i = 0; i < bins.size(); ++i) {
      const Prf prf = micro_f1(bins[i].counts);
      ScoreRow row;
      row.name = "SSx[" + std::to_string(bins[i].rank_lo) + "-" +
                 std::to_string(bins[i].rank_hi) + ")";
      row.nt = bins[i].counts.nt;
      row.precision = prf.precision;
      row.recall = prf.recall;
      row.f1 = prf.f1;
      row.bin = static_cast<int>(i);
      row.seed = be_seed_id;
      rows.push_back(std::move(row));
    }
    std::cout << render_report_table(rows);
    if (!be_out.empty()) write_report_csv(be_out, rows);
    return 0;
  }

  if (cs->parsed()) {
    auto collect = [&cs_metric](const std::string& dir) {
      std::vector<std::string> files;
      for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.path().extension() == ".csv") {
          files.push_back(entry.path().string());
        }
      }
      std::sort(files.begin(), files.end());
      std::vector<double> samples;
      for (const auto& f : files) {
        samples.push_back(metric_from_report(read_report_csv(f), cs_metric));
      }
      return samples;
    };
    const std::vector<double> a = collect(cs_dir_a);
    const std::vector<double> b = collect(cs_dir_b);
    if (a.size() < 2 || b.size() < 2) {
      throw std::runtime_error("need >= 2 report CSVs per directory");
    }
    const TTestResult r = cs_pooled ? pooled_t_test(a, b) : welch_t_test(a, b);
    const std::string marker = significance_marker(r.p, r.mean_b >= r.mean_a);
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "%s: a(n=%zu) mean %.4f | b(n=%zu) mean %.4f | t=%.4f "
                  "p=%.6f %s\n",
                  cs_metric.c_str(), a.size(), r.mean_a, b.size(), r.mean_b,
                  r.t, r.p, marker.c_str());
    std::cout << buf;
    return 0;
  }

  if (ac->parsed()) {
    Corpus source = load_corpus(ac_source);
    Corpus target = load_corpus(ac_target);
    auto points = trigger_coverage(source, target, ac_top_n);
    if (!ac_csv.empty()) write_coverage_csv(ac_csv, points);
    if (!ac_svg.empty()) write_coverage_svg(ac_svg, points);
    if (!points.empty()) {
      std::cout << "at rank " << points.back().rank << ": source coverage "
                << points.back().source_coverage << ", target coverage "
                << points.back().target_coverage << "\n";
    }
    return 0;
  }

  if (as->parsed()) {
    Corpus source = load_corpus(as_source);
    Corpus target = load_corpus(as_target);
    Corpus gold = as_gold.empty() ? target : load_corpus(as_gold);
    gold = normalize_assertions(gold);
    Corpus base = load_corpus(as_base);
    Corpus masked = load_corpus(as_masked);
    auto changes = fn_change(gold, base, masked, as_top_n);
    auto rows = scatter_data(source, target, changes);
    if (!as_csv.empty()) write_scatter_csv(as_csv, rows);
    if (!as_svg.empty()) write_scatter_svg(as_svg, rows);
    long long improved = 0, improved_above = 0;
    for (const auto& r : rows) {
      if (r.delta_fn < 0) {
        ++improved;
        if (r.above_diagonal) ++improved_above;
      }
    }
    std::cout << rows.size() << " phrases tracked; " << improved
              << " with reduced FN, of which " << improved_above
              << " above the diagonal\n";
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const SchemaError& e) {
    std::cerr << "schema violation: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
