// ria: command-line front end for the recurrent image annotator.
//
// Subcommands: synth, stats, train, annotate, evaluate, gradcheck,
// compare-orders. Every run is reproducible from --seed; all output
// files are written atomically (temp file + rename).

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "ria/data.hpp"
#include "ria/eval.hpp"
#include "ria/inference.hpp"
#include "ria/model.hpp"
#include "ria/ordering.hpp"
#include "ria/training.hpp"

namespace {

using namespace ria;

// Flags override values from an optional JSON config file, which override
// built-in defaults. apply_config only touches options absent from argv.
void apply_config(const CLI::App& cmd, const std::string& config_path,
                  const std::vector<std::pair<std::string, std::function<void(const nlohmann::json&)>>>& keys) {
  if (config_path.empty()) return;
  std::ifstream in(config_path);
  if (!in) throw std::runtime_error("cannot open config file '" + config_path + "'");
  nlohmann::json j;
  in >> j;
  for (const auto& [key, apply] : keys) {
    if (!j.contains(key)) continue;
    if (cmd.count("--" + key) > 0) continue;  // explicit flag wins
    apply(j.at(key));
  }
}

std::string stats_text(const SummaryStats& s) {
  std::ostringstream out;
  char buf[128];
  std::snprintf(buf, sizeof buf, "%-18s %zu\n", "Vocabulary size", s.vocab_size);
  out << buf;
  std::snprintf(buf, sizeof buf, "%-18s %zu\n", "Nr. of images", s.image_count);
  out << buf;
  std::snprintf(buf, sizeof buf, "%-18s %.1f / %zu\n", "Words per image", s.mean_words_per_image,
                s.max_words_per_image);
  out << buf;
  std::snprintf(buf, sizeof buf, "%-18s %.1f / %zu\n", "Images per word", s.mean_images_per_word,
                s.max_images_per_word);
  out << buf;
  return out.str();
}

nlohmann::json stats_json(const SummaryStats& s) {
  return {{"vocab_size", s.vocab_size},
          {"images", s.image_count},
          {"mean_words_per_image", s.mean_words_per_image},
          {"max_words_per_image", s.max_words_per_image},
          {"mean_images_per_word", s.mean_images_per_word},
          {"max_images_per_word", s.max_images_per_word}};
}

std::string annotations_to_jsonl(const std::map<std::string, Annotation>& annotations,
                                 const Vocabulary& vocab) {
  std::ostringstream out;
  for (const auto& [id, ann] : annotations) {
    nlohmann::json tags = nlohmann::json::array();
    for (std::size_t t : ann.tags) tags.push_back(vocab.tags[t]);
    nlohmann::json line = {{"id", id}, {"tags", tags}, {"hit_cap", ann.hit_cap}};
    out << line.dump() << '\n';
  }
  return out.str();
}

TagSets load_tag_sets_jsonl(const std::string& path, const Vocabulary& vocab) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  TagSets out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line);
    std::set<std::size_t> tags;
    for (const auto& t : j.at("tags")) tags.insert(vocab.lookup(t.get<std::string>()));
    std::string id = j.at("id").get<std::string>();
    if (out.count(id))
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": duplicate id '" + id + "'");
    out[id] = std::move(tags);
  }
  return out;
}

std::string metrics_text(const Metrics& m) {
  std::ostringstream out;
  char buf[128];
  std::snprintf(buf, sizeof buf, "%-18s %.4f (%d%%)\n", "Precision", m.mean_precision,
                as_percent(m.mean_precision));
  out << buf;
  std::snprintf(buf, sizeof buf, "%-18s %.4f (%d%%)\n", "Recall", m.mean_recall,
                as_percent(m.mean_recall));
  out << buf;
  std::snprintf(buf, sizeof buf, "%-18s %.4f (%d%%)\n", "F-measure", m.f_measure,
                as_percent(m.f_measure));
  out << buf;
  std::snprintf(buf, sizeof buf, "%-18s %zu\n", "N+", m.n_plus);
  out << buf;
  if (m.excluded_classes > 0) {
    std::snprintf(buf, sizeof buf, "%-18s %zu\n", "Excluded classes", m.excluded_classes);
    out << buf;
  }
  return out.str();
}

struct HyperFlags {
  OptimizerConfig opt;
  std::size_t embed_dim = 256;
  std::size_t hidden_dim = 256;
  std::size_t max_len = 20;
  std::size_t eval_every = 0;
  bool resample_random_order = false;
};

void add_hyper_flags(CLI::App* cmd, HyperFlags& h) {
  cmd->add_option("--embed-dim", h.embed_dim, "Tag embedding dimension D")->capture_default_str();
  cmd->add_option("--hidden-dim", h.hidden_dim, "LSTM hidden dimension H")->capture_default_str();
  cmd->add_option("--lr", h.opt.learning_rate, "Adam learning rate")->capture_default_str();
  cmd->add_option("--beta1", h.opt.beta1, "Adam beta1")->capture_default_str();
  cmd->add_option("--beta2", h.opt.beta2, "Adam beta2")->capture_default_str();
  cmd->add_option("--adam-eps", h.opt.epsilon, "Adam epsilon")->capture_default_str();
  cmd->add_option("--clip-norm", h.opt.clip_norm, "Global gradient norm cap")->capture_default_str();
  cmd->add_option("--batch-size", h.opt.batch_size, "Mini-batch size")->capture_default_str();
  cmd->add_option("--dropout", h.opt.dropout_rate, "Dropout rate at the classifier input")
      ->capture_default_str();
  cmd->add_option("--max-len", h.max_len, "Decode length cap (arbitrary mode)")
      ->capture_default_str();
  cmd->add_option("--eval-every", h.eval_every,
                  "Evaluate the test split every k epochs (0 = never)")
      ->capture_default_str();
  cmd->add_flag("--resample-random-order", h.resample_random_order,
                "Redraw random tag orders each epoch (random strategy only)");
}

TrainResult run_training(const Dataset& data, const HyperFlags& h, OrderStrategy strategy,
                         bool log_epochs) {
  ModelConfig mc;
  mc.feature_dim = data.feature_dim;
  mc.embed_dim = h.embed_dim;
  mc.hidden_dim = h.hidden_dim;
  mc.tag_count = data.vocab.size();

  TrainOptions topt;
  topt.eval_every = h.eval_every;
  topt.eval_policy.max_len = h.max_len;
  topt.resample_random_order_each_epoch = h.resample_random_order;
  topt.log_epochs = log_epochs;
  return train(data, mc, h.opt, strategy, topt);
}

int run(int argc, char** argv) {
  CLI::App app{"Recurrent image annotator: LSTM tag-sequence prediction over "
               "precomputed image features"};
  app.require_subcommand(1);

  // --- synth ------------------------------------------------------------
  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  SyntheticConfig sc;
  std::string synth_out, synth_config;
  double train_fraction = 0.8;
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--seed", sc.seed, "Master seed")->capture_default_str();
  synth->add_option("--clusters", sc.cluster_count, "Number of feature clusters")
      ->capture_default_str();
  synth->add_option("--vocab", sc.vocab_size, "Vocabulary size")->capture_default_str();
  synth->add_option("--feature-dim", sc.feature_dim, "Feature dimension")->capture_default_str();
  synth->add_option("--tags-per-cluster", sc.tags_per_cluster, "Tags owned by each cluster")
      ->capture_default_str();
  synth->add_option("--examples", sc.examples, "Total examples before the split")
      ->capture_default_str();
  synth->add_option("--zipf", sc.zipf_exponent, "Zipf exponent for tag frequencies")
      ->capture_default_str();
  synth->add_option("--noise", sc.noise_sigma, "Feature noise sigma")->capture_default_str();
  synth->add_option("--tag-draw-cap", sc.tag_draw_cap, "Max tags drawn per chosen cluster")
      ->capture_default_str();
  synth->add_option("--train-fraction", train_fraction, "Train split fraction")
      ->capture_default_str();
  synth->add_option("--config", synth_config, "JSON config file (flags override it)");

  // --- stats ------------------------------------------------------------
  auto* stats = app.add_subcommand("stats", "Dataset summary statistics");
  std::string stats_train, stats_test, stats_vocab;
  bool stats_as_json = false;
  stats->add_option("--train", stats_train, "Training examples (JSONL)")->required();
  stats->add_option("--test", stats_test, "Test examples (JSONL)");
  stats->add_option("--vocab", stats_vocab, "Vocabulary file")->required();
  stats->add_flag("--json", stats_as_json, "Emit JSON instead of aligned text");

  // --- train ------------------------------------------------------------
  auto* traincmd = app.add_subcommand("train", "Train a model");
  std::string tr_train, tr_test, tr_vocab, tr_checkpoint, tr_history, tr_order = "rare-first";
  std::string tr_config;
  HyperFlags tr_h;
  traincmd->add_option("--train", tr_train, "Training examples (JSONL)")->required();
  traincmd->add_option("--test", tr_test, "Test examples (JSONL)");
  traincmd->add_option("--vocab", tr_vocab, "Vocabulary file")->required();
  traincmd->add_option("--order", tr_order,
                       "Tag order: dictionary|random|rare-first|frequent-first")
      ->capture_default_str();
  traincmd->add_option("--epochs", tr_h.opt.epochs, "Training epochs")->required();
  traincmd->add_option("--seed", tr_h.opt.seed, "Master seed")->capture_default_str();
  traincmd->add_option("--checkpoint", tr_checkpoint, "Checkpoint output path (JSON)");
  traincmd->add_option("--history", tr_history, "Per-epoch history output (CSV)");
  traincmd->add_option("--config", tr_config, "JSON config file (flags override it)");
  add_hyper_flags(traincmd, tr_h);

  // --- annotate ---------------------------------------------------------
  auto* annotate = app.add_subcommand("annotate", "Decode tag sequences for a dataset");
  std::string an_checkpoint, an_data, an_out, an_mode = "arbitrary";
  DecodePolicy an_policy;
  bool an_k_given = false;
  annotate->add_option("--checkpoint", an_checkpoint, "Trained checkpoint")->required();
  annotate->add_option("--data", an_data, "Examples to annotate (JSONL)")->required();
  annotate->add_option("--out", an_out, "Output JSONL path (default stdout)");
  annotate->add_option("--mode", an_mode, "arbitrary | fixed-k")->capture_default_str();
  annotate->add_option("--k", an_policy.k, "Number of tags in fixed-k mode")
      ->each([&](const std::string&) { an_k_given = true; });
  annotate->add_option("--max-len", an_policy.max_len, "Length cap in arbitrary mode")
      ->capture_default_str();

  // --- evaluate ---------------------------------------------------------
  auto* evalcmd = app.add_subcommand("evaluate", "Per-class metrics of predictions");
  std::string ev_pred, ev_data, ev_vocab, ev_json_out;
  evalcmd->add_option("--predictions", ev_pred, "Predictions (JSONL, annotate output)")
      ->required();
  evalcmd->add_option("--data", ev_data, "Ground-truth examples (JSONL)")->required();
  evalcmd->add_option("--vocab", ev_vocab, "Vocabulary file")->required();
  evalcmd->add_option("--json", ev_json_out, "Write full per-class metrics JSON here");

  // --- gradcheck --------------------------------------------------------
  auto* gradcheck = app.add_subcommand("gradcheck",
                                       "Finite-difference gradient check on a tiny model");
  std::uint64_t gc_seed = 1;
  double gc_eps = 1e-5;
  gradcheck->add_option("--seed", gc_seed, "Seed for parameters and feature")
      ->capture_default_str();
  gradcheck->add_option("--eps", gc_eps, "Central-difference step")->capture_default_str();

  // --- compare-orders ---------------------------------------------------
  auto* compare = app.add_subcommand(
      "compare-orders", "Train all four tag orders over several seeds and summarize");
  std::string co_train, co_test, co_vocab, co_out;
  std::size_t co_seeds = 5;
  HyperFlags co_h;
  std::uint64_t co_seed0 = 1;
  compare->add_option("--train", co_train, "Training examples (JSONL)")->required();
  compare->add_option("--test", co_test, "Test examples (JSONL)")->required();
  compare->add_option("--vocab", co_vocab, "Vocabulary file")->required();
  compare->add_option("--out", co_out, "Output directory")->required();
  compare->add_option("--epochs", co_h.opt.epochs, "Epochs per run")->required();
  compare->add_option("--seeds", co_seeds, "Number of seeds per strategy")
      ->capture_default_str();
  compare->add_option("--seed", co_seed0, "First master seed")->capture_default_str();
  add_hyper_flags(compare, co_h);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (*synth) {
    apply_config(*synth, synth_config,
                 {{"seed", [&](const nlohmann::json& v) { sc.seed = v.get<std::uint64_t>(); }},
                  {"clusters", [&](const nlohmann::json& v) { sc.cluster_count = v.get<std::size_t>(); }},
                  {"vocab", [&](const nlohmann::json& v) { sc.vocab_size = v.get<std::size_t>(); }},
                  {"feature-dim", [&](const nlohmann::json& v) { sc.feature_dim = v.get<std::size_t>(); }},
                  {"examples", [&](const nlohmann::json& v) { sc.examples = v.get<std::size_t>(); }},
                  {"zipf", [&](const nlohmann::json& v) { sc.zipf_exponent = v.get<double>(); }},
                  {"noise", [&](const nlohmann::json& v) { sc.noise_sigma = v.get<double>(); }},
                  {"tag-draw-cap", [&](const nlohmann::json& v) { sc.tag_draw_cap = v.get<std::size_t>(); }},
                  {"train-fraction", [&](const nlohmann::json& v) { train_fraction = v.get<double>(); }}});
    Dataset all = generate_synthetic(sc);
    std::string warning;
    Dataset split = split_dataset(all, train_fraction, sc.seed, &warning);
    if (!warning.empty()) std::cerr << "warning: " << warning << '\n';
    write_dataset(split, synth_out);
    std::cout << "wrote " << split.train.size() << " train / " << split.test.size()
              << " test examples to " << synth_out << '\n';
    return 0;
  }

  if (*stats) {
    Dataset d = load_dataset(stats_train, stats_test, stats_vocab);
    SummaryStats s = summarize(d.train, d.vocab);
    if (stats_as_json) {
      nlohmann::json j = {{"train", stats_json(s)}};
      if (!d.test.empty()) j["test"] = stats_json(summarize(d.test, d.vocab));
      std::cout << j.dump(2) << '\n';
    } else {
      std::cout << "train split\n" << stats_text(s);
      if (!d.test.empty()) std::cout << "test split\n" << stats_text(summarize(d.test, d.vocab));
    }
    return 0;
  }

  if (*traincmd) {
    apply_config(*traincmd, tr_config,
                 {{"lr", [&](const nlohmann::json& v) { tr_h.opt.learning_rate = v.get<double>(); }},
                  {"adam-eps", [&](const nlohmann::json& v) { tr_h.opt.epsilon = v.get<double>(); }},
                  {"clip-norm", [&](const nlohmann::json& v) { tr_h.opt.clip_norm = v.get<double>(); }},
                  {"batch-size", [&](const nlohmann::json& v) { tr_h.opt.batch_size = v.get<std::size_t>(); }},
                  {"dropout", [&](const nlohmann::json& v) { tr_h.opt.dropout_rate = v.get<double>(); }},
                  {"embed-dim", [&](const nlohmann::json& v) { tr_h.embed_dim = v.get<std::size_t>(); }},
                  {"hidden-dim", [&](const nlohmann::json& v) { tr_h.hidden_dim = v.get<std::size_t>(); }},
                  {"order", [&](const nlohmann::json& v) { tr_order = v.get<std::string>(); }},
                  {"seed", [&](const nlohmann::json& v) { tr_h.opt.seed = v.get<std::uint64_t>(); }}});
    if (tr_h.eval_every > 0 && tr_test.empty())
      throw CLI::ValidationError("--eval-every requires --test");
    Dataset data = load_dataset(tr_train, tr_test, tr_vocab);
    OrderStrategy strategy = order_strategy_from_string(tr_order);
    TrainResult result = run_training(data, tr_h, strategy, true);
    if (!tr_history.empty()) write_text_atomic(tr_history, result.history.to_csv());
    if (!tr_checkpoint.empty()) {
      ModelConfig mc{data.feature_dim, tr_h.embed_dim, tr_h.hidden_dim, data.vocab.size()};
      save_checkpoint(result.params, mc, data.vocab, tr_checkpoint);
    }
    if (!result.history.records.empty())
      std::cout << "final mean loss " << result.history.records.back().mean_loss << '\n';
    return 0;
  }

  if (*annotate) {
    if (an_mode != "arbitrary" && an_mode != "fixed-k")
      throw CLI::ValidationError("--mode must be arbitrary or fixed-k");
    if (an_k_given && an_mode != "fixed-k")
      throw CLI::ValidationError("--k is only valid with --mode fixed-k");
    an_policy.mode = an_mode == "fixed-k" ? DecodeMode::fixed_k : DecodeMode::arbitrary;
    Checkpoint ck = load_checkpoint(an_checkpoint);
    std::size_t feature_dim = ck.config.feature_dim;
    std::vector<Example> examples = load_examples(an_data, ck.vocab, feature_dim);
    auto annotations = annotate_dataset(ck.params, ck.config, examples, an_policy);
    std::string jsonl = annotations_to_jsonl(annotations, ck.vocab);
    if (an_out.empty())
      std::cout << jsonl;
    else
      write_text_atomic(an_out, jsonl);
    return 0;
  }

  if (*evalcmd) {
    Vocabulary vocab = load_vocabulary(ev_vocab);
    std::size_t feature_dim = 0;
    std::vector<Example> gt_examples = load_examples(ev_data, vocab, feature_dim);
    TagSets gt;
    for (const auto& ex : gt_examples)
      gt[ex.id] = std::set<std::size_t>(ex.tags.begin(), ex.tags.end());
    TagSets preds = load_tag_sets_jsonl(ev_pred, vocab);
    Metrics m = evaluate(preds, gt, vocab.size());
    std::cout << metrics_text(m);
    if (!ev_json_out.empty()) {
      nlohmann::json j = {{"precision", m.mean_precision},
                          {"recall", m.mean_recall},
                          {"f_measure", m.f_measure},
                          {"n_plus", m.n_plus},
                          {"excluded_classes", m.excluded_classes},
                          {"per_class_precision", m.per_class_precision},
                          {"per_class_recall", m.per_class_recall},
                          {"support", m.support},
                          {"prediction_counts", m.prediction_counts}};
      write_text_atomic(ev_json_out, j.dump(2));
    }
    return 0;
  }

  if (*gradcheck) {
    ModelConfig mc{4, 3, 3, 5};
    SeededRng init_rng(derive_seed(gc_seed, seed_stream::init));
    Parameters params = init_parameters(mc, init_rng);
    SeededRng rng(derive_seed(gc_seed, 20));
    Vector feature(mc.feature_dim);
    for (double& x : feature) x = rng.normal();
    OrderedSequence seq = make_sequence({2, 0, 4}, mc.tag_count);
    GradCheckReport report = check_gradients(params, mc, feature, seq, gc_eps, rng);
    std::cout << "max relative error " << report.max_rel_error << " (array "
              << report.worst_array << ", " << report.checked_coords << " coordinates)\n";
    return report.max_rel_error < 1e-4 ? 0 : 1;
  }

  if (*compare) {
    Dataset data = load_dataset(co_train, co_test, co_vocab);
    std::filesystem::create_directories(co_out);
    if (co_h.eval_every == 0) co_h.eval_every = 10;
    const OrderStrategy strategies[] = {OrderStrategy::dictionary, OrderStrategy::random,
                                        OrderStrategy::rare_first, OrderStrategy::frequent_first};
    std::vector<std::pair<std::string, Metrics>> summary_rows;
    for (OrderStrategy strategy : strategies) {
      std::vector<Metrics> finals;
      for (std::size_t s = 0; s < co_seeds; ++s) {
        HyperFlags h = co_h;
        h.opt.seed = co_seed0 + s;
        std::cerr << "training " << to_string(strategy) << " seed " << h.opt.seed << '\n';
        TrainResult result = run_training(data, h, strategy, false);
        std::string name = to_string(strategy);
        std::replace(name.begin(), name.end(), '-', '_');
        write_text_atomic(co_out + "/history_" + name + "_seed" + std::to_string(h.opt.seed) +
                              ".csv",
                          result.history.to_csv());
        for (auto it = result.history.records.rbegin(); it != result.history.records.rend(); ++it)
          if (it->eval) {
            finals.push_back(*it->eval);
            break;
          }
      }
      // median-by-field summary over seeds
      auto median = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        return v.empty() ? 0.0 : v[v.size() / 2];
      };
      Metrics med;
      std::vector<double> p, r, f, n;
      for (const auto& m : finals) {
        p.push_back(m.mean_precision);
        r.push_back(m.mean_recall);
        f.push_back(m.f_measure);
        n.push_back(static_cast<double>(m.n_plus));
      }
      med.mean_precision = median(p);
      med.mean_recall = median(r);
      med.f_measure = median(f);
      med.n_plus = static_cast<std::size_t>(median(n));
      summary_rows.emplace_back(to_string(strategy), med);
    }
    write_text_atomic(co_out + "/summary.txt", compare_orders_table(summary_rows));
    write_text_atomic(co_out + "/summary.csv", compare_orders_csv(summary_rows));
    std::cout << compare_orders_table(summary_rows);
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
