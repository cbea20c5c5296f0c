// Copyright 2026 The dyncascade Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// dyncascade: corpus generation, training, fine-tuning, evaluation,
// streaming demo, extraction, quantization and size accounting.
//
// Exit codes: 0 ok, 1 usage or config error, 2 data error, 3 numeric failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "dce/training.hpp"

namespace {

using dce::ConfigError;
using dce::DataError;
using json = nlohmann::ordered_json;

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

struct ModelOptions {
  std::string preset;
  std::string config;
  std::string decoder_mode;
  std::string downsample;
};

void add_model_options(CLI::App* cmd, ModelOptions& o) {
  cmd->add_option("--preset", o.preset, "Named super-net configuration");
  cmd->add_option("--config", o.config, "key=value config file applied on top of --preset");
  cmd->add_option("--decoder-mode", o.decoder_mode, "shared|separate");
  cmd->add_option("--downsample", o.downsample, "stacking|avgpool|funnel");
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "' for reading");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

bool model_options_given(const ModelOptions& o) {
  return !o.preset.empty() || !o.config.empty() || !o.decoder_mode.empty() || !o.downsample.empty();
}

dce::SuperNetConfig resolve_config(const ModelOptions& o, const std::string& fallback_preset) {
  const std::string name = o.preset.empty() ? fallback_preset : o.preset;
  dce::SuperNetConfig cfg;
  if (!name.empty()) cfg = dce::preset(name);
  if (!o.config.empty()) cfg = dce::config_from_text(slurp(o.config), cfg);
  if (!o.decoder_mode.empty()) cfg.sharing = dce::parse_decoder_sharing(o.decoder_mode);
  if (!o.downsample.empty()) cfg.encoder.downsample = dce::parse_downsample(o.downsample);
  cfg.validate();
  return cfg;
}

dce::ModelFile load_with_precedence(const std::string& path, const ModelOptions& o) {
  dce::ModelFile mf = dce::load_model(path);
  if (model_options_given(o)) {
    std::cerr << "warning: the config embedded in " << path << " overrides --preset/--config/--decoder-mode/"
              << "--downsample\n";
  }
  return mf;
}

void write_report(const std::string& path, const json& j) {
  if (path.empty()) return;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out << j.dump(2) << "\n";
}

std::string default_report(const std::string& artifact, const std::string& report) {
  if (!report.empty()) return report;
  return artifact.empty() ? "" : artifact + ".json";
}

json weights_json(const std::vector<double>& w) { return json(w); }

// Runs `fn` with the model parameters in the precision they were stored in.
template <typename Fn>
auto with_params(const dce::ModelFile& mf, Fn&& fn) {
  if (mf.dtype == dce::DType::kF64) {
    const dce::ParameterSet<double>& p = mf.params;
    return fn(p);
  }
  const dce::ParameterSet<float> p = dce::cast_parameters<float>(mf.params);
  return fn(p);
}

std::string labels_text(const std::vector<int>& labels) {
  std::string out;
  for (int l : labels) out += (out.empty() ? "" : " ") + std::to_string(l);
  return out.empty() ? "<empty>" : out;
}

// ---------------------------------------------------------------------------

struct GenDataArgs {
  std::string out, report, split = "train";
  int n = 2000;
  dce::CorpusSpec spec;
};

int cmd_gen_data(const GenDataArgs& a) {
  if (a.n < 1) throw CLI::ValidationError("--n", "must be >= 1");
  dce::Split split = dce::Split::kTrain;
  if (a.split == "dev") split = dce::Split::kDev;
  else if (a.split == "test") split = dce::Split::kTest;
  else if (a.split != "train") throw CLI::ValidationError("--split", "expected train|dev|test");
  dce::Corpus c{a.spec.vocab_size, a.spec.feature_dim, dce::synth_generate(a.spec, a.n, split)};
  dce::write_corpus(a.out, c);
  std::size_t frames = 0, labels = 0;
  for (const auto& u : c.utterances) {
    frames += static_cast<std::size_t>(u.frames.rows());
    labels += u.labels.size();
  }
  std::cout << "wrote " << c.utterances.size() << " utterances (" << frames << " frames, " << labels
            << " labels) to " << a.out << "\n";
  json j;
  j["command"] = "gen-data";
  j["path"] = a.out;
  j["split"] = a.split;
  j["utterances"] = c.utterances.size();
  j["frames"] = frames;
  j["labels"] = labels;
  j["vocab_size"] = a.spec.vocab_size;
  j["feature_dim"] = a.spec.feature_dim;
  j["seed"] = a.spec.seed;
  write_report(default_report(a.out, a.report), j);
  return 0;
}

struct TrainArgs {
  ModelOptions model;
  std::string corpus, out, report, log;
  std::uint64_t seed = 1;
  int steps = 3000, batch = 8, warmup = 200, checkpoint_every = 0;
  double lr = 1e-3;
  std::vector<double> weights;
  bool float64 = false;
};

template <typename Scalar>
int run_train(const TrainArgs& a, const dce::SuperNetConfig& cfg, const std::vector<dce::Utterance>& data) {
  dce::TrainConfig tc;
  tc.loss_weights = a.weights;
  tc.batch_size = a.batch;
  tc.steps = a.steps;
  tc.learning_rate = a.lr;
  tc.warmup_steps = a.warmup;
  tc.seed = a.seed;
  tc.checkpoint_every = a.checkpoint_every;
  tc.checkpoint_path = a.checkpoint_every > 0 ? a.out : "";
  dce::SuperNetConfig saved = cfg;
  if (!a.weights.empty()) saved.loss_weights = a.weights;
  std::ofstream log_file;
  std::ostream* log = &std::cout;
  if (!a.log.empty()) {
    log_file.open(a.log, std::ios::trunc);
    if (!log_file) throw DataError("cannot open '" + a.log + "' for writing");
    log = &log_file;
  }
  auto result = dce::train_mle(data, saved, dce::build_supernet<Scalar>(saved, a.seed), tc, log);
  dce::save_model(a.out, saved, result.params);
  json j;
  j["command"] = "train";
  j["config"] = saved.name;
  j["seed"] = a.seed;
  j["steps"] = result.completed_steps;
  j["loss_weights"] = weights_json(saved.loss_weights);
  j["diverged"] = result.diverged;
  if (!result.history.empty()) {
    j["final_loss"] = result.history.back().loss;
    j["final_sub_losses"] = result.history.back().sub_losses;
  }
  j["model"] = a.out;
  write_report(default_report(a.out, a.report), j);
  std::cout << "trained " << result.completed_steps << " steps, model written to " << a.out << "\n";
  if (result.diverged) {
    std::cerr << "error: training diverged at " << result.failure << "; last good parameters saved\n";
    return kExitNumeric;
  }
  return 0;
}

int cmd_train(const TrainArgs& a) {
  const dce::SuperNetConfig cfg = resolve_config(a.model, "desk-triple");
  const dce::Corpus corpus = dce::read_corpus(a.corpus);
  return a.float64 ? run_train<double>(a, cfg, corpus.utterances) : run_train<float>(a, cfg, corpus.utterances);
}

struct MwerArgs {
  ModelOptions model;
  std::string in, corpus, out, report;
  std::uint64_t seed = 1;
  int steps = 500, beam = 4, batch = 8;
  double lr = 1e-4;
  std::vector<double> weights;
  bool no_baseline = false, per_utterance = false;
};

int cmd_mwer(const MwerArgs& a) {
  const dce::ModelFile mf = load_with_precedence(a.in, a.model);
  const dce::Corpus corpus = dce::read_corpus(a.corpus);
  dce::MwerConfig mc;
  mc.beam = a.beam;
  mc.steps = a.steps;
  mc.batch_size = a.batch;
  mc.learning_rate = a.lr;
  mc.baseline_subtraction = !a.no_baseline;
  mc.per_utterance_sampling = a.per_utterance;
  mc.sampling_weights = a.weights;
  mc.seed = a.seed;
  return with_params(mf, [&](const auto& params) {
    auto result = dce::mwer_finetune(corpus.utterances, mf.config, params, mc, &std::cout);
    dce::save_model(a.out, mf.config, result.params);
    std::vector<int> counts(static_cast<std::size_t>(mf.config.num_submodels()), 0);
    for (int k : result.sampled) ++counts[static_cast<std::size_t>(k)];
    json j;
    j["command"] = "mwer";
    j["seed"] = a.seed;
    j["steps"] = a.steps;
    j["beam"] = a.beam;
    j["baseline_subtraction"] = mc.baseline_subtraction;
    j["sampled_counts"] = counts;
    j["skipped_utterances"] = result.skipped_utterances;
    j["model"] = a.out;
    write_report(default_report(a.out, a.report), j);
    std::cout << "fine-tuned " << a.steps << " steps (" << result.skipped_utterances
              << " utterances skipped), model written to " << a.out << "\n";
    return 0;
  });
}

struct EvalArgs {
  ModelOptions model;
  std::string in, corpus, report, decode = "greedy";
  int k = -1, beam = 4;
  bool per_utterance = false;
};

int cmd_eval(const EvalArgs& a) {
  const dce::ModelFile mf = load_with_precedence(a.in, a.model);
  const dce::Corpus corpus = dce::read_corpus(a.corpus);
  if (a.decode != "greedy" && a.decode != "beam") throw CLI::ValidationError("--decode", "expected greedy|beam");
  const dce::DecodeMode mode = a.decode == "beam" ? dce::DecodeMode::kBeam : dce::DecodeMode::kGreedy;
  const int K = mf.config.num_submodels();
  if (a.k >= K) throw ConfigError("--k " + std::to_string(a.k) + " outside [0, " + std::to_string(K) + ")");
  json j;
  j["command"] = "eval";
  j["model"] = a.in;
  j["corpus"] = a.corpus;
  j["decode"] = a.decode;
  j["submodels"] = json::array();
  with_params(mf, [&](const auto& params) {
    for (int k = 0; k < K; ++k) {
      if (a.k >= 0 && k != a.k) continue;
      const dce::EvalReport r = dce::evaluate(corpus.utterances, params, mf.config, k, mode, a.beam);
      std::cout << "sub-model " << k << ": WER " << r.wer * 100 << "% (" << r.errors << " errors / "
                << r.reference_labels << " labels)\n";
      json s;
      s["k"] = k;
      s["wer"] = r.wer;
      s["errors"] = r.errors;
      s["reference_labels"] = r.reference_labels;
      if (a.per_utterance) {
        s["utterances"] = json::array();
        for (const auto& u : r.utterances) {
          s["utterances"].push_back({{"reference", u.reference}, {"hypothesis", u.hypothesis}, {"errors", u.errors}});
        }
      }
      j["submodels"].push_back(s);
    }
    return 0;
  });
  write_report(a.report, j);
  return 0;
}

struct ExtractArgs {
  ModelOptions model;
  std::string in, out, report;
  int k = 0;
};

int cmd_extract(const ExtractArgs& a) {
  const dce::ModelFile mf = load_with_precedence(a.in, a.model);
  const dce::SuperNetConfig sub = dce::extracted_config(mf.config, a.k);
  const dce::ParameterSet<double> params = dce::extract_parameters(mf.params, mf.config, a.k);
  if (mf.dtype == dce::DType::kI8) {
    dce::QuantizedBundle b;
    for (const auto& entry : params) {
      b.tensors.emplace(entry.first, mf.quantized.tensors.at(dce::extraction_source(mf.config, a.k, entry.first)));
    }
    dce::save_quantized(a.out, sub, b);
  } else {
    dce::io::write_file(a.out, dce::encode_model(sub, params, mf.dtype));
  }
  const dce::Index n = dce::numel(params);
  std::cout << "extracted sub-model " << a.k << " (" << n << " parameters) to " << a.out << "\n";
  json j;
  j["command"] = "extract";
  j["k"] = a.k;
  j["parameters"] = n;
  j["encoder_layers"] = sub.encoder.num_layers();
  j["model"] = a.out;
  write_report(default_report(a.out, a.report), j);
  return 0;
}

struct QuantizeArgs {
  ModelOptions model;
  std::string in, out, report;
};

int cmd_quantize(const QuantizeArgs& a) {
  const dce::ModelFile mf = load_with_precedence(a.in, a.model);
  const dce::QuantizedBundle b = dce::quantize_int8(mf.params);
  dce::save_quantized(a.out, mf.config, b);
  const std::uint64_t reported = dce::quantized_size_bytes(mf.config);
  const std::uint64_t actual = dce::io::read_file(a.out).size();
  double max_err_over_scale = 0;
  for (const auto& [name, q] : b.tensors) {
    const auto& w = mf.params.at(name);
    for (dce::Index i = 0; i < w.size(); ++i) {
      const double err = std::abs(w.data()[i] - static_cast<double>(q.values[static_cast<std::size_t>(i)]) * q.scale);
      max_err_over_scale = std::max(max_err_over_scale, err / q.scale);
    }
  }
  std::cout << "quantized " << b.tensors.size() << " tensors; reported size " << reported << " bytes, file "
            << actual << " bytes; max error " << max_err_over_scale << " x scale\n";
  json j;
  j["command"] = "quantize";
  j["tensors"] = b.tensors.size();
  j["parameters"] = dce::numel(mf.params);
  j["reported_size_bytes"] = reported;
  j["file_size_bytes"] = actual;
  j["max_error_over_scale"] = max_err_over_scale;
  j["model"] = a.out;
  write_report(default_report(a.out, a.report), j);
  return 0;
}

struct CountArgs {
  ModelOptions model;
  std::string report;
};

int cmd_count(const CountArgs& a) {
  const dce::SuperNetConfig cfg = resolve_config(a.model, "paper-triple");
  const dce::ParamReport r = dce::count_params(cfg);
  auto millions = [](dce::Index n) { return static_cast<double>(n) / 1e6; };
  std::cout << "config " << cfg.name << " (decoders " << dce::to_string(cfg.sharing) << ", downsample "
            << dce::to_string(cfg.encoder.downsample) << ")\n";
  json j;
  j["command"] = "count-params";
  j["config"] = cfg.name;
  json segs = json::array();
  for (const auto* group : {&r.causal_segments, &r.non_causal_segments, &r.decoders}) {
    for (const auto& s : *group) {
      std::cout << "  " << s.name << ": " << s.params << " (" << millions(s.params) << "M)\n";
      segs.push_back({{"name", s.name}, {"params", s.params}});
    }
  }
  j["components"] = segs;
  j["submodel_totals"] = r.submodel_totals;
  for (std::size_t k = 0; k < r.submodel_totals.size(); ++k) {
    std::cout << "  sub-model " << k << " standalone: " << r.submodel_totals[k] << " ("
              << millions(r.submodel_totals[k]) << "M)\n";
  }
  std::cout << "  super-net total: " << r.supernet_total << " (" << millions(r.supernet_total) << "M)\n";
  std::cout << "  sum of standalone sub-models: " << r.standalone_sum << " (" << millions(r.standalone_sum) << "M)\n";
  std::cout << "  sharing reduction ratio: " << r.reduction_ratio << "\n";
  j["supernet_total"] = r.supernet_total;
  j["standalone_sum"] = r.standalone_sum;
  j["reduction_ratio"] = r.reduction_ratio;
  if (cfg.name == "paper-triple" || cfg.name == "paper-large-medium") {
    // Rounded component sizes (millions) of the reference systems: 20 + 26.8
    // (or one 46.8) causal, 60 non-causal, a 4.4 decoder per pass.
    const double reference = cfg.name == "paper-triple"
                                 ? dce::sharing_reduction_ratio({20.0, 26.8, 60.0}, {4.4, 4.4, 4.4}, {1, 2, 3})
                                 : dce::sharing_reduction_ratio({46.8, 60.0}, {4.4, 4.4}, {1, 2});
    std::cout << "  reduction ratio from reference component sizes: " << reference << "\n";
    j["reference_component_reduction_ratio"] = reference;
  }
  write_report(a.report, j);
  return 0;
}

struct StreamArgs {
  ModelOptions model;
  std::string in, corpus, report;
  int index = 0, chunk = 1;
};

int cmd_stream(const StreamArgs& a) {
  if (a.chunk < 0) throw CLI::ValidationError("--chunk", "must be >= 0 (0 = whole utterance)");
  const dce::ModelFile mf = load_with_precedence(a.in, a.model);
  const dce::Corpus corpus = dce::read_corpus(a.corpus);
  if (a.index < 0 || a.index >= static_cast<int>(corpus.utterances.size())) {
    throw DataError("--index " + std::to_string(a.index) + " outside the corpus");
  }
  const dce::SuperNetConfig& cfg = mf.config;
  // Partial pass: deepest causal-only sub-model. Final pass: deepest overall.
  int partial = -1, final_k = 0;
  for (int k = 0; k < cfg.num_submodels(); ++k) {
    const auto& s = cfg.submodels[k];
    if (s.m_non_causal == 0 && (partial < 0 || s.n_causal > cfg.submodels[partial].n_causal)) partial = k;
    if (s.encoder_layers() > cfg.submodels[final_k].encoder_layers()) final_k = k;
  }
  if (partial < 0) partial = final_k;
  json j;
  j["command"] = "stream";
  j["chunk"] = a.chunk;
  j["partials"] = json::array();
  with_params(mf, [&](const auto& params) {
    using Scalar = typename std::decay_t<decltype(params)>::mapped_type::Scalar;
    const dce::Utterance& utt = corpus.utterances[static_cast<std::size_t>(a.index)];
    const dce::Mat<Scalar> x = dce::encoder_input<Scalar>(utt, cfg.frontend);
    const int depth = cfg.submodels[final_k].encoder_layers();
    const int partial_depth = cfg.submodels[partial].encoder_layers();
    dce::EncoderState<Scalar> state(params, cfg.encoder, depth);
    dce::GreedyDecoder<Scalar> first(params, cfg.decoder_of(partial), cfg.submodels[partial].decoder);
    dce::GreedyDecoder<Scalar> second(params, cfg.decoder_of(final_k), cfg.submodels[final_k].decoder);
    const dce::Index step = a.chunk == 0 ? x.rows() : a.chunk;
    auto consume = [&](const typename dce::EncoderState<Scalar>::Emission& e, dce::Index fed) {
      const dce::Mat<Scalar>& p_rows = partial_depth == 0 ? e.output : e.layers[partial_depth - 1];
      const std::vector<int> before = first.labels();
      first.advance(p_rows);
      second.advance(e.output);
      if (first.labels() != before) {
        std::cout << "[frame " << fed << "] partial: " << labels_text(first.labels()) << "\n";
        j["partials"].push_back({{"frames", fed}, {"labels", first.labels()}});
      }
    };
    for (dce::Index t = 0; t < x.rows(); t += step) {
      const dce::Index n = std::min(step, x.rows() - t);
      consume(state.step(x.middleRows(t, n)), t + n);
    }
    consume(state.flush(), x.rows());
    std::cout << "final: " << labels_text(second.labels()) << "\n";
    std::cout << "reference: " << labels_text(utt.labels) << "\n";
    j["final"] = second.labels();
    j["reference"] = utt.labels;
    j["partial_submodel"] = partial;
    j["final_submodel"] = final_k;
    j["final_lookahead_frames"] = dce::encoder_reach(cfg.encoder, depth).right;
    return 0;
  });
  write_report(a.report, j);
  return 0;
}

struct CompareArgs {
  ModelOptions model;
  std::string train, dev, report;
  std::vector<std::uint64_t> seeds{1};
  int steps = 3000;
};

int cmd_compare(const CompareArgs& a) {
  const dce::SuperNetConfig cfg = resolve_config(a.model, "desk-large-medium");
  const dce::Corpus train = dce::read_corpus(a.train);
  const dce::Corpus dev = dce::read_corpus(a.dev);
  dce::TrainConfig tc;
  tc.steps = a.steps;
  const auto rows = dce::compare_downsampling(train.utterances, dev.utterances, cfg, a.seeds, tc, &std::cout);
  json j;
  j["command"] = "compare-downsampling";
  j["rows"] = json::array();
  std::cout << "method     seed  params  wer_medium  wer_large\n";
  for (const auto& r : rows) {
    std::cout << dce::to_string(r.method) << "  " << r.seed << "  " << r.params << "  " << r.wer_medium << "  "
              << r.wer_large << "\n";
    j["rows"].push_back({{"method", dce::to_string(r.method)},
                         {"seed", r.seed},
                         {"params", r.params},
                         {"wer_medium", r.wer_medium},
                         {"wer_large", r.wer_large}});
  }
  write_report(a.report, j);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cascaded streaming transducer super-nets with extractable sub-models"};
  app.require_subcommand(1);

  GenDataArgs gen;
  auto* c_gen = app.add_subcommand("gen-data", "Generate a synthetic corpus");
  c_gen->add_option("--out", gen.out, "Output corpus path")->required();
  c_gen->add_option("--n", gen.n, "Number of utterances");
  c_gen->add_option("--split", gen.split, "train|dev|test");
  c_gen->add_option("--seed", gen.spec.seed, "Generator seed");
  c_gen->add_option("--vocab", gen.spec.vocab_size, "Vocabulary size");
  c_gen->add_option("--feature-dim", gen.spec.feature_dim, "Feature dimension");
  c_gen->add_option("--noise", gen.spec.noise_stddev, "Gaussian noise stddev");
  c_gen->add_option("--min-frames", gen.spec.min_frames_per_symbol, "Minimum frames per symbol");
  c_gen->add_option("--max-frames", gen.spec.max_frames_per_symbol, "Maximum frames per symbol");
  c_gen->add_option("--report", gen.report, "JSON report path (default <out>.json)");

  TrainArgs train;
  auto* c_train = app.add_subcommand("train", "Joint maximum-likelihood training of all sub-models");
  add_model_options(c_train, train.model);
  c_train->add_option("--corpus", train.corpus, "Training corpus")->required();
  c_train->add_option("--out", train.out, "Output model path")->required();
  c_train->add_option("--seed", train.seed, "Seed for initialisation and batching");
  c_train->add_option("--steps", train.steps, "Optimizer steps");
  c_train->add_option("--batch", train.batch, "Utterances per step");
  c_train->add_option("--lr", train.lr, "Peak learning rate");
  c_train->add_option("--warmup", train.warmup, "Linear warmup steps");
  c_train->add_option("--weights", train.weights, "Loss weights, one per sub-model");
  c_train->add_option("--log", train.log, "Metrics log path (default stdout)");
  c_train->add_option("--checkpoint-every", train.checkpoint_every, "Write the model every N steps");
  c_train->add_flag("--float64", train.float64, "Train in double precision");
  c_train->add_option("--report", train.report, "JSON report path (default <out>.json)");

  MwerArgs mwer;
  auto* c_mwer = app.add_subcommand("mwer", "MWER fine-tuning with sampled sub-models");
  add_model_options(c_mwer, mwer.model);
  c_mwer->add_option("--model", mwer.in, "Input model")->required();
  c_mwer->add_option("--corpus", mwer.corpus, "Training corpus")->required();
  c_mwer->add_option("--out", mwer.out, "Output model path")->required();
  c_mwer->add_option("--seed", mwer.seed, "Sampling seed");
  c_mwer->add_option("--steps", mwer.steps, "Fine-tuning steps");
  c_mwer->add_option("--beam", mwer.beam, "Hypotheses per utterance");
  c_mwer->add_option("--batch", mwer.batch, "Utterances per step");
  c_mwer->add_option("--lr", mwer.lr, "Learning rate");
  c_mwer->add_option("--weights", mwer.weights, "Sub-model sampling weights (default: model loss weights)");
  c_mwer->add_flag("--no-baseline", mwer.no_baseline, "Use the plain expected error count");
  c_mwer->add_flag("--per-utterance", mwer.per_utterance, "Sample a sub-model per utterance");
  c_mwer->add_option("--report", mwer.report, "JSON report path (default <out>.json)");

  EvalArgs eval;
  auto* c_eval = app.add_subcommand("eval", "Word error rate of one or all sub-models");
  add_model_options(c_eval, eval.model);
  c_eval->add_option("--model", eval.in, "Model file")->required();
  c_eval->add_option("--corpus", eval.corpus, "Evaluation corpus")->required();
  c_eval->add_option("--k", eval.k, "Sub-model index (default: all)");
  c_eval->add_option("--decode", eval.decode, "greedy|beam");
  c_eval->add_option("--beam", eval.beam, "Beam width for --decode beam");
  c_eval->add_flag("--per-utterance", eval.per_utterance, "Include per-utterance results in the JSON report");
  c_eval->add_option("--report", eval.report, "JSON report path");

  ExtractArgs extract;
  auto* c_extract = app.add_subcommand("extract", "Write sub-model k as a standalone model");
  add_model_options(c_extract, extract.model);
  c_extract->add_option("--model", extract.in, "Super-net model")->required();
  c_extract->add_option("--k", extract.k, "Sub-model index")->required();
  c_extract->add_option("--out", extract.out, "Output model path")->required();
  c_extract->add_option("--report", extract.report, "JSON report path (default <out>.json)");

  QuantizeArgs quant;
  auto* c_quant = app.add_subcommand("quantize", "Per-tensor symmetric int8 quantization");
  add_model_options(c_quant, quant.model);
  c_quant->add_option("--model", quant.in, "Input model")->required();
  c_quant->add_option("--out", quant.out, "Output model path")->required();
  c_quant->add_option("--report", quant.report, "JSON report path (default <out>.json)");

  CountArgs count;
  auto* c_count = app.add_subcommand("count-params", "Parameter accounting and sharing reduction");
  add_model_options(c_count, count.model);
  c_count->add_option("--report", count.report, "JSON report path");

  StreamArgs stream;
  auto* c_stream = app.add_subcommand("stream", "Chunked streaming demo with partial and final passes");
  add_model_options(c_stream, stream.model);
  c_stream->add_option("--model", stream.in, "Model file")->required();
  c_stream->add_option("--corpus", stream.corpus, "Corpus holding the utterance")->required();
  c_stream->add_option("--index", stream.index, "Utterance index");
  c_stream->add_option("--chunk", stream.chunk, "Encoder-input frames per chunk (0 = whole utterance)");
  c_stream->add_option("--report", stream.report, "JSON report path");

  CompareArgs compare;
  auto* c_compare = app.add_subcommand("compare-downsampling", "Train stacking, avgpool and funnel variants");
  add_model_options(c_compare, compare.model);
  c_compare->add_option("--corpus", compare.train, "Training corpus")->required();
  c_compare->add_option("--dev", compare.dev, "Dev corpus")->required();
  c_compare->add_option("--seed", compare.seeds, "Seeds (repeatable)");
  c_compare->add_option("--steps", compare.steps, "Training steps per run");
  c_compare->add_option("--report", compare.report, "JSON report path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (c_gen->parsed()) return cmd_gen_data(gen);
    if (c_train->parsed()) return cmd_train(train);
    if (c_mwer->parsed()) return cmd_mwer(mwer);
    if (c_eval->parsed()) return cmd_eval(eval);
    if (c_extract->parsed()) return cmd_extract(extract);
    if (c_quant->parsed()) return cmd_quantize(quant);
    if (c_count->parsed()) return cmd_count(count);
    if (c_stream->parsed()) return cmd_stream(stream);
    if (c_compare->parsed()) return cmd_compare(compare);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const dce::NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
