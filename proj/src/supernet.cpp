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

#include "dce/supernet.hpp"

#include <charconv>
#include <functional>
#include <set>
#include <sstream>

namespace dce {
namespace {

constexpr char kModelMagic[] = "DCEM1";

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string join_doubles(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += format_double(v[i]);
  }
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

int parse_int(const std::string& key, const std::string& v) {
  int out = 0;
  auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw ConfigError("config: key '" + key + "' expects an integer, got '" + v + "'");
  }
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  double out = 0;
  auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw ConfigError("config: key '" + key + "' expects a number, got '" + v + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config: key '" + key + "' expects true|false, got '" + v + "'");
}

ConformerLayerConfig layer(int dim, int heads, int kernel, int left, int right, bool attention) {
  ConformerLayerConfig l;
  l.model_dim = dim;
  l.num_heads = heads;
  l.conv_kernel = kernel;
  l.left_context = left;
  l.right_context = right;
  l.has_self_attention = attention;
  l.causal_conv = true;
  return l;
}

DecoderConfig decoder(int vocab, int embed, int context, int joint) {
  DecoderConfig d;
  d.vocab_size = vocab;
  d.embed_dim = embed;
  d.label_context = context;
  d.joint_dim = joint;
  return d;
}

SuperNetConfig paper_large_medium() {
  SuperNetConfig c;
  c.name = "paper-large-medium";
  c.frontend = FrontendConfig{128, 4, 3, 16};
  c.encoder.input_dim = c.frontend.output_dim();
  for (int i = 0; i < 7; ++i) c.encoder.layers.push_back(layer(512, 8, 8, 23, 0, i >= 3));
  for (int i = 0; i < 6; ++i) c.encoder.layers.push_back(layer(640, 8, 8, 23, 5, true));
  c.encoder.num_causal = 7;
  c.encoder.downsample = Downsample::kFunnel;
  c.encoder.downsample_layer = 3;
  const DecoderConfig d = decoder(4096, 320, 2, 384);
  c.submodels = {{7, 0, d}, {7, 6, d}};
  c.loss_weights = {0.9, 0.1};
  return c;
}

SuperNetConfig paper_triple() {
  SuperNetConfig c;
  c.name = "paper-triple";
  c.frontend = FrontendConfig{128, 4, 3, 16};
  c.encoder.input_dim = c.frontend.output_dim();
  for (int i = 0; i < 6; ++i) c.encoder.layers.push_back(layer(256, 8, 8, 23, 0, i >= 3));
  for (int i = 0; i < 6; ++i) c.encoder.layers.push_back(layer(512, 8, 8, 23, 0, true));
  for (int i = 0; i < 6; ++i) c.encoder.layers.push_back(layer(640, 8, 8, 23, 5, true));
  c.encoder.num_causal = 12;
  c.encoder.downsample = Downsample::kFunnel;
  c.encoder.downsample_layer = 3;
  const DecoderConfig d = decoder(4096, 320, 2, 384);
  c.submodels = {{6, 0, d}, {12, 0, d}, {12, 6, d}};
  c.loss_weights = {0.80, 0.15, 0.05};
  return c;
}

FrontendConfig desk_frontend() { return FrontendConfig{16, 4, 3, 16}; }

SuperNetConfig desk_triple() {
  SuperNetConfig c;
  c.name = "desk-triple";
  c.frontend = desk_frontend();
  c.encoder.input_dim = c.frontend.output_dim();
  c.encoder.layers = {layer(16, 2, 5, 8, 0, false), layer(16, 2, 5, 8, 0, true),
                      layer(32, 2, 5, 8, 0, true),  layer(32, 2, 5, 8, 0, true),
                      layer(48, 2, 5, 8, 2, true),  layer(48, 2, 5, 8, 2, true)};
  c.encoder.num_causal = 4;
  c.encoder.downsample = Downsample::kFunnel;
  c.encoder.downsample_layer = 1;
  const DecoderConfig d = decoder(8, 16, 2, 32);
  c.submodels = {{2, 0, d}, {4, 0, d}, {4, 2, d}};
  c.loss_weights = {0.80, 0.15, 0.05};
  return c;
}

// Equal widths in both stacks so the shared-decoder mode is available.
SuperNetConfig desk_large_medium() {
  SuperNetConfig c;
  c.name = "desk-large-medium";
  c.frontend = desk_frontend();
  c.encoder.input_dim = c.frontend.output_dim();
  c.encoder.layers = {layer(32, 2, 5, 8, 0, false), layer(32, 2, 5, 8, 0, true), layer(32, 2, 5, 8, 0, true),
                      layer(32, 2, 5, 8, 2, true), layer(32, 2, 5, 8, 2, true)};
  c.encoder.num_causal = 3;
  c.encoder.downsample = Downsample::kFunnel;
  c.encoder.downsample_layer = 1;
  const DecoderConfig d = decoder(8, 16, 2, 32);
  c.submodels = {{3, 0, d}, {3, 2, d}};
  c.loss_weights = {0.9, 0.1};
  return c;
}

// Single causal model, the learnability baseline for the synthetic corpus.
SuperNetConfig desk_single() {
  SuperNetConfig c;
  c.name = "desk-single";
  c.frontend = desk_frontend();
  c.encoder.input_dim = c.frontend.output_dim();
  c.encoder.layers = {layer(32, 2, 5, 8, 0, false), layer(32, 2, 5, 8, 0, true)};
  c.encoder.num_causal = 2;
  c.encoder.downsample = Downsample::kFunnel;
  c.encoder.downsample_layer = 1;
  c.submodels = {{2, 0, decoder(8, 16, 2, 32)}};
  c.loss_weights = {1.0};
  return c;
}

}  // namespace

std::string to_string(DecoderSharing s) { return s == DecoderSharing::kShared ? "shared" : "separate"; }

DecoderSharing parse_decoder_sharing(const std::string& s) {
  if (s == "shared") return DecoderSharing::kShared;
  if (s == "separate") return DecoderSharing::kSeparate;
  throw ConfigError("unknown decoder mode '" + s + "' (expected shared|separate)");
}

std::string SuperNetConfig::decoder_of(int k) const {
  return decoder_prefix(sharing == DecoderSharing::kShared ? 0 : k);
}

std::vector<std::string> SuperNetConfig::violations() const {
  std::vector<std::string> v = encoder.violations();
  if (frontend.stack < 1 || frontend.factor < 1 || frontend.feature_dim < 1 || frontend.domain_dim < 0) {
    v.push_back("frontend dimensions must be positive");
  }
  if (frontend.output_dim() != encoder.input_dim) {
    v.push_back("frontend output dim " + std::to_string(frontend.output_dim()) + " != encoder input_dim " +
                std::to_string(encoder.input_dim));
  }
  const int N = encoder.num_causal, M = encoder.num_non_causal();
  if (submodels.empty()) v.push_back("at least one sub-model is required");
  for (int k = 0; k < num_submodels(); ++k) {
    const auto& s = submodels[k];
    const std::string tag = "sub-model " + std::to_string(k) + ": ";
    if (s.n_causal < 0 || s.n_causal > N) v.push_back(tag + "n_k must lie in [0, " + std::to_string(N) + "]");
    if (s.m_non_causal < 0 || s.m_non_causal > M) {
      v.push_back(tag + "m_k must lie in [0, " + std::to_string(M) + "]");
    }
    if (s.m_non_causal > 0 && s.n_causal != N) {
      v.push_back(tag + "m_k > 0 requires the full causal stack (n_k == " + std::to_string(N) + ")");
    }
    for (const auto& d : s.decoder.violations()) v.push_back(tag + d);
  }
  if (loss_weights.size() != submodels.size()) {
    v.push_back("expected " + std::to_string(submodels.size()) + " loss weights, got " +
                std::to_string(loss_weights.size()));
  } else {
    double total = 0;
    for (double w : loss_weights) {
      if (!(w >= 0)) v.push_back("loss weights must be >= 0");
      total += w;
    }
    if (std::abs(total - 1.0) > 1e-9) v.push_back("loss weights sum to " + format_double(total) + ", not 1");
  }
  if (sharing == DecoderSharing::kShared && v.empty()) {
    for (int k = 1; k < num_submodels(); ++k) {
      const auto& a = submodels[0].decoder;
      const auto& b = submodels[k].decoder;
      if (encoder_dim(k) != encoder_dim(0)) {
        v.push_back("shared decoder needs equal encoder output dims (sub-model 0: " + std::to_string(encoder_dim(0)) +
                    ", sub-model " + std::to_string(k) + ": " + std::to_string(encoder_dim(k)) + ")");
      }
      if (a.vocab_size != b.vocab_size || a.embed_dim != b.embed_dim || a.label_context != b.label_context ||
          a.joint_dim != b.joint_dim || a.lattice != b.lattice) {
        v.push_back("shared decoder needs identical decoder configs");
      }
    }
  }
  return v;
}

void SuperNetConfig::validate() const {
  const auto v = violations();
  if (v.empty()) return;
  std::ostringstream os;
  os << "invalid super-net config '" << name << "':";
  for (const auto& m : v) os << "\n  - " << m;
  throw ConfigError(os.str());
}

std::string config_to_text(const SuperNetConfig& c) {
  std::ostringstream os;
  os << "name=" << c.name << "\n";
  os << "frontend.feature_dim=" << c.frontend.feature_dim << "\n";
  os << "frontend.stack=" << c.frontend.stack << "\n";
  os << "frontend.factor=" << c.frontend.factor << "\n";
  os << "frontend.domain_dim=" << c.frontend.domain_dim << "\n";
  os << "encoder.input_dim=" << c.encoder.input_dim << "\n";
  os << "encoder.num_layers=" << c.encoder.num_layers() << "\n";
  os << "encoder.num_causal=" << c.encoder.num_causal << "\n";
  os << "encoder.downsample=" << to_string(c.encoder.downsample) << "\n";
  os << "encoder.downsample_layer=" << c.encoder.downsample_layer << "\n";
  for (int i = 0; i < c.encoder.num_layers(); ++i) {
    const auto& l = c.encoder.layers[i];
    const std::string p = "encoder.layer." + std::to_string(i) + ".";
    os << p << "model_dim=" << l.model_dim << "\n";
    os << p << "num_heads=" << l.num_heads << "\n";
    os << p << "ffn_expansion=" << l.ffn_expansion << "\n";
    os << p << "conv_kernel=" << l.conv_kernel << "\n";
    os << p << "left_context=" << l.left_context << "\n";
    os << p << "right_context=" << l.right_context << "\n";
    os << p << "self_attention=" << (l.has_self_attention ? "true" : "false") << "\n";
    os << p << "causal_conv=" << (l.causal_conv ? "true" : "false") << "\n";
  }
  os << "num_submodels=" << c.num_submodels() << "\n";
  for (int k = 0; k < c.num_submodels(); ++k) {
    const auto& s = c.submodels[k];
    const std::string p = "submodel." + std::to_string(k) + ".";
    os << p << "n_causal=" << s.n_causal << "\n";
    os << p << "m_non_causal=" << s.m_non_causal << "\n";
    os << p << "decoder.vocab_size=" << s.decoder.vocab_size << "\n";
    os << p << "decoder.embed_dim=" << s.decoder.embed_dim << "\n";
    os << p << "decoder.label_context=" << s.decoder.label_context << "\n";
    os << p << "decoder.joint_dim=" << s.decoder.joint_dim << "\n";
    os << p << "decoder.lattice=" << to_string(s.decoder.lattice) << "\n";
    os << p << "decoder.max_symbols_per_frame=" << s.decoder.max_symbols_per_frame << "\n";
  }
  os << "loss_weights=" << join_doubles(c.loss_weights) << "\n";
  os << "decoder_sharing=" << to_string(c.sharing) << "\n";
  return os.str();
}

SuperNetConfig config_from_text(const std::string& text, const SuperNetConfig& base) {
  std::vector<std::pair<std::string, std::string>> entries;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value, got '" + line + "'");
    }
    entries.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  SuperNetConfig c = base;
  // Counts first so indexed keys can appear in any order.
  for (const auto& [k, v] : entries) {
    if (k == "encoder.num_layers") {
      const int n = parse_int(k, v);
      if (n < 0 || n > 4096) throw ConfigError("config: encoder.num_layers out of range");
      c.encoder.layers.resize(static_cast<std::size_t>(n));
    } else if (k == "num_submodels") {
      const int n = parse_int(k, v);
      if (n < 0 || n > 64) throw ConfigError("config: num_submodels out of range");
      c.submodels.resize(static_cast<std::size_t>(n));
    }
  }
  auto indexed = [](const std::string& key, const std::string& head, int limit, std::string& rest) -> int {
    if (key.compare(0, head.size(), head) != 0) return -1;
    const auto dot = key.find('.', head.size());
    if (dot == std::string::npos) return -1;
    int idx = -1;
    const std::string num = key.substr(head.size(), dot - head.size());
    auto res = std::from_chars(num.data(), num.data() + num.size(), idx);
    if (res.ec != std::errc() || res.ptr != num.data() + num.size()) return -1;
    if (idx < 0 || idx >= limit) throw ConfigError("config: index out of range in '" + key + "'");
    rest = key.substr(dot + 1);
    return idx;
  };
  for (const auto& [k, v] : entries) {
    std::string rest;
    int idx = -1;
    if (k == "encoder.num_layers" || k == "num_submodels") continue;
    if (k == "name") {
      c.name = v;
    } else if (k == "frontend.feature_dim") {
      c.frontend.feature_dim = parse_int(k, v);
    } else if (k == "frontend.stack") {
      c.frontend.stack = parse_int(k, v);
    } else if (k == "frontend.factor") {
      c.frontend.factor = parse_int(k, v);
    } else if (k == "frontend.domain_dim") {
      c.frontend.domain_dim = parse_int(k, v);
    } else if (k == "encoder.input_dim") {
      c.encoder.input_dim = parse_int(k, v);
    } else if (k == "encoder.num_causal") {
      c.encoder.num_causal = parse_int(k, v);
    } else if (k == "encoder.downsample") {
      c.encoder.downsample = parse_downsample(v);
    } else if (k == "encoder.downsample_layer") {
      c.encoder.downsample_layer = parse_int(k, v);
    } else if ((idx = indexed(k, "encoder.layer.", c.encoder.num_layers(), rest)) >= 0) {
      auto& l = c.encoder.layers[static_cast<std::size_t>(idx)];
      if (rest == "model_dim") l.model_dim = parse_int(k, v);
      else if (rest == "num_heads") l.num_heads = parse_int(k, v);
      else if (rest == "ffn_expansion") l.ffn_expansion = parse_int(k, v);
      else if (rest == "conv_kernel") l.conv_kernel = parse_int(k, v);
      else if (rest == "left_context") l.left_context = parse_int(k, v);
      else if (rest == "right_context") l.right_context = parse_int(k, v);
      else if (rest == "self_attention") l.has_self_attention = parse_bool(k, v);
      else if (rest == "causal_conv") l.causal_conv = parse_bool(k, v);
      else throw ConfigError("config: unknown key '" + k + "'");
    } else if ((idx = indexed(k, "submodel.", c.num_submodels(), rest)) >= 0) {
      auto& s = c.submodels[static_cast<std::size_t>(idx)];
      if (rest == "n_causal") s.n_causal = parse_int(k, v);
      else if (rest == "m_non_causal") s.m_non_causal = parse_int(k, v);
      else if (rest == "decoder.vocab_size") s.decoder.vocab_size = parse_int(k, v);
      else if (rest == "decoder.embed_dim") s.decoder.embed_dim = parse_int(k, v);
      else if (rest == "decoder.label_context") s.decoder.label_context = parse_int(k, v);
      else if (rest == "decoder.joint_dim") s.decoder.joint_dim = parse_int(k, v);
      else if (rest == "decoder.lattice") s.decoder.lattice = parse_lattice(v);
      else if (rest == "decoder.max_symbols_per_frame") s.decoder.max_symbols_per_frame = parse_int(k, v);
      else throw ConfigError("config: unknown key '" + k + "'");
    } else if (k == "loss_weights") {
      c.loss_weights.clear();
      std::istringstream parts(v);
      std::string item;
      while (std::getline(parts, item, ',')) c.loss_weights.push_back(parse_double(k, trim(item)));
    } else if (k == "decoder_sharing") {
      c.sharing = parse_decoder_sharing(v);
    } else {
      throw ConfigError("config: unknown key '" + k + "'");
    }
  }
  return c;
}

std::vector<std::string> preset_names() {
  return {"paper-large-medium", "paper-triple", "desk-triple", "desk-large-medium", "desk-single"};
}

SuperNetConfig preset(const std::string& name) {
  static const std::map<std::string, std::function<SuperNetConfig()>> table = {
      {"paper-large-medium", paper_large_medium}, {"paper-triple", paper_triple},
      {"desk-triple", desk_triple},               {"desk-large-medium", desk_large_medium},
      {"desk-single", desk_single}};
  auto it = table.find(name);
  if (it == table.end()) {
    std::string known;
    for (const auto& n : preset_names()) known += (known.empty() ? "" : ", ") + n;
    throw ConfigError("unknown preset '" + name + "' (known: " + known + ")");
  }
  return it->second();
}

TensorLayout supernet_layout(const SuperNetConfig& cfg) {
  TensorLayout out = encoder_layout(cfg.encoder);
  const int decoders = cfg.sharing == DecoderSharing::kShared ? std::min(1, cfg.num_submodels()) : cfg.num_submodels();
  for (int k = 0; k < decoders; ++k) {
    auto d = decoder_layout(cfg.submodels[k].decoder, cfg.encoder_dim(k), decoder_prefix(k));
    out.insert(out.end(), d.begin(), d.end());
  }
  return out;
}

SuperNetConfig extracted_config(const SuperNetConfig& cfg, int k) {
  if (k < 0 || k >= cfg.num_submodels()) {
    throw ConfigError("extract: k=" + std::to_string(k) + " outside [0, " + std::to_string(cfg.num_submodels()) + ")");
  }
  const SubModelConfig& s = cfg.submodels[k];
  SuperNetConfig out = cfg;
  out.encoder.layers.resize(static_cast<std::size_t>(s.encoder_layers()));
  out.encoder.num_causal = s.n_causal;
  out.encoder.downsample_layer = std::min(cfg.encoder.downsample_layer, s.n_causal);
  out.submodels = {s};
  out.loss_weights = {1.0};
  out.sharing = DecoderSharing::kSeparate;
  return out;
}

std::string extraction_source(const SuperNetConfig& cfg, int k, const std::string& name) {
  const std::string dst = decoder_prefix(0) + ".";
  if (name.compare(0, dst.size(), dst) != 0) return name;
  return cfg.decoder_of(k) + name.substr(dst.size() - 1);
}

ParamReport count_params(const SuperNetConfig& cfg) {
  cfg.validate();
  ParamReport r;
  const int N = cfg.encoder.num_causal, L = cfg.encoder.num_layers();
  auto layers_between = [&](int a, int b) {
    Index n = 0;
    for (int i = a; i < b; ++i) n += conformer_layer_param_count(cfg.encoder.layers[i], cfg.encoder.layer_input_dim(i));
    return n;
  };
  std::set<int> causal_cuts{N}, nc_cuts{L};
  for (const auto& s : cfg.submodels) {
    causal_cuts.insert(s.n_causal);
    nc_cuts.insert(N + s.m_non_causal);
  }
  int prev = 0;
  for (int c : causal_cuts) {
    if (c == 0) continue;
    r.causal_segments.push_back({"causal[" + std::to_string(prev) + "," + std::to_string(c) + ")",
                                 layers_between(prev, c)});
    prev = c;
  }
  for (int c : nc_cuts) {
    if (c == N) continue;
    r.non_causal_segments.push_back({"non_causal[" + std::to_string(prev - N) + "," + std::to_string(c - N) + ")",
                                     layers_between(prev, c)});
    prev = c;
  }
  r.encoder_total = layers_between(0, L);

  Index decoders_total = 0;
  for (int k = 0; k < cfg.num_submodels(); ++k) {
    const auto& s = cfg.submodels[k];
    const Index d = decoder_param_count(s.decoder, cfg.encoder_dim(k));
    if (cfg.sharing == DecoderSharing::kSeparate || k == 0) {
      r.decoders.push_back({cfg.decoder_of(k), d});
      decoders_total += d;
    }
    const int depth = s.encoder_layers();
    r.submodel_totals.push_back(layers_between(0, depth) + d);
    r.standalone_sum += r.submodel_totals.back();
  }
  r.supernet_total = r.encoder_total + decoders_total;
  r.reduction_ratio = 1.0 - static_cast<double>(r.supernet_total) / static_cast<double>(r.standalone_sum);
  return r;
}

double sharing_reduction_ratio(const std::vector<double>& segment_sizes, const std::vector<double>& decoder_sizes,
                               const std::vector<int>& segments_used) {
  if (decoder_sizes.size() != segments_used.size()) {
    throw ConfigError("sharing_reduction_ratio: one decoder size per sub-model is required");
  }
  double unified = 0, separate = 0;
  for (double s : segment_sizes) unified += s;
  for (std::size_t k = 0; k < decoder_sizes.size(); ++k) {
    if (segments_used[k] < 0 || segments_used[k] > static_cast<int>(segment_sizes.size())) {
      throw ConfigError("sharing_reduction_ratio: segment count out of range");
    }
    unified += decoder_sizes[k];
    double own = decoder_sizes[k];
    for (int i = 0; i < segments_used[k]; ++i) own += segment_sizes[static_cast<std::size_t>(i)];
    separate += own;
  }
  return 1.0 - unified / separate;
}

// ---------------------------------------------------------------------------
// Model files.

namespace {

void write_header(io::ByteWriter& w, const SuperNetConfig& cfg, std::size_t tensors) {
  const std::string text = config_to_text(cfg);
  w.text(kModelMagic);
  w.u32(kModelFormatVersion);
  w.u64(text.size());
  w.text(text);
  w.u32(static_cast<std::uint32_t>(tensors));
}

void write_record(io::ByteWriter& w, const std::string& name, DType dt, Index rows, Index cols,
                  const std::vector<std::uint8_t>& payload) {
  w.u16(static_cast<std::uint16_t>(name.size()));
  w.text(name);
  w.u8(static_cast<std::uint8_t>(dt));
  w.u32(2);
  w.u64(static_cast<std::uint64_t>(rows));
  w.u64(static_cast<std::uint64_t>(cols));
  w.u64(io::fnv1a(payload.data(), payload.size()));
  w.bytes(payload.data(), payload.size());
}

constexpr std::uint64_t kHeaderFixedBytes = 5 + 4 + 8 + 4;
constexpr std::uint64_t kRecordFixedBytes = 2 + 1 + 4 + 8 + 8 + 8;

void check_layout(const SuperNetConfig& cfg, const std::map<std::string, std::pair<Index, Index>>& shapes,
                  const std::string& what) {
  const TensorLayout layout = supernet_layout(cfg);
  if (layout.size() != shapes.size()) {
    throw DataError(what + ": " + std::to_string(shapes.size()) + " tensors, config expects " +
                    std::to_string(layout.size()));
  }
  for (const auto& t : layout) {
    auto it = shapes.find(t.name);
    if (it == shapes.end()) throw DataError(what + ": missing tensor " + t.name);
    if (it->second.first != t.rows || it->second.second != t.cols) {
      throw DataError(what + ": tensor " + t.name + " has wrong shape");
    }
  }
}

}  // namespace

std::vector<std::uint8_t> encode_model(const SuperNetConfig& cfg, const ParameterSet<double>& params, DType dtype) {
  if (dtype == DType::kI8) return encode_quantized(cfg, quantize_int8(params));
  io::ByteWriter w;
  write_header(w, cfg, params.size());
  for (const auto& [name, m] : params) {
    io::ByteWriter payload;
    for (Index i = 0; i < m.size(); ++i) {
      if (dtype == DType::kF32) {
        payload.f32(static_cast<float>(m.data()[i]));
      } else {
        payload.f64(m.data()[i]);
      }
    }
    write_record(w, name, dtype, m.rows(), m.cols(), payload.data());
  }
  return w.data();
}

std::vector<std::uint8_t> encode_quantized(const SuperNetConfig& cfg, const QuantizedBundle& bundle) {
  io::ByteWriter w;
  write_header(w, cfg, bundle.tensors.size());
  for (const auto& [name, q] : bundle.tensors) {
    io::ByteWriter payload;
    payload.f32(q.scale);
    payload.bytes(q.values.data(), q.values.size());
    write_record(w, name, DType::kI8, q.rows, q.cols, payload.data());
  }
  return w.data();
}

ModelFile decode_model(const std::vector<std::uint8_t>& bytes, const std::string& what) {
  io::ByteReader r(bytes.data(), bytes.size(), what);
  if (r.text(5) != kModelMagic) throw DataError(what + ": not a model file (bad magic)");
  const std::uint32_t version = r.u32();
  if (version != kModelFormatVersion) {
    throw DataError(what + ": unsupported format version " + std::to_string(version));
  }
  const std::uint64_t text_len = r.u64();
  if (text_len > bytes.size()) throw DataError(what + ": truncated");
  ModelFile mf;
  mf.config = config_from_text(r.text(static_cast<std::size_t>(text_len)));
  mf.config.validate();
  const std::uint32_t count = r.u32();
  std::map<std::string, std::pair<Index, Index>> shapes;
  bool first = true;
  for (std::uint32_t t = 0; t < count; ++t) {
    const std::string name = r.text(r.u16());
    const std::uint8_t dt = r.u8();
    if (dt > 2) throw DataError(what + ": tensor " + name + " has unknown dtype");
    if (first) mf.dtype = static_cast<DType>(dt);
    if (static_cast<DType>(dt) != mf.dtype) throw DataError(what + ": mixed tensor dtypes");
    first = false;
    if (r.u32() != 2) throw DataError(what + ": tensor " + name + " is not 2-D");
    const std::uint64_t rows = r.u64(), cols = r.u64();
    const std::uint64_t checksum = r.u64();
    if (rows > bytes.size() || cols > bytes.size() || rows * cols > bytes.size()) {
      throw DataError(what + ": truncated");
    }
    const std::uint64_t n = rows * cols;
    const std::size_t payload_size =
        mf.dtype == DType::kI8 ? 4 + n : (mf.dtype == DType::kF32 ? 4 * n : 8 * n);
    const std::uint8_t* payload = r.take(payload_size);
    if (io::fnv1a(payload, payload_size) != checksum) {
      throw DataError(what + ": checksum mismatch in tensor " + name);
    }
    io::ByteReader pr(payload, payload_size, what);
    Mat<double> m(static_cast<Index>(rows), static_cast<Index>(cols));
    if (mf.dtype == DType::kI8) {
      QuantizedTensor q;
      q.rows = m.rows();
      q.cols = m.cols();
      q.scale = pr.f32();
      q.values.resize(n);
      for (auto& v : q.values) v = static_cast<std::int8_t>(pr.u8());
      for (Index i = 0; i < m.size(); ++i) {
        m.data()[i] = static_cast<double>(q.values[static_cast<std::size_t>(i)]) * static_cast<double>(q.scale);
      }
      mf.quantized.tensors.emplace(name, std::move(q));
    } else {
      for (Index i = 0; i < m.size(); ++i) m.data()[i] = mf.dtype == DType::kF32 ? pr.f32() : pr.f64();
    }
    if (!shapes.emplace(name, std::make_pair(m.rows(), m.cols())).second) {
      throw DataError(what + ": duplicate tensor " + name);
    }
    mf.params.emplace(name, std::move(m));
  }
  if (!r.done()) throw DataError(what + ": trailing bytes after tensor table");
  check_layout(mf.config, shapes, what);
  return mf;
}

ModelFile load_model(const std::string& path) { return decode_model(io::read_file(path), "model " + path); }

void save_quantized(const std::string& path, const SuperNetConfig& cfg, const QuantizedBundle& bundle) {
  io::write_file(path, encode_quantized(cfg, bundle));
}

std::uint64_t quantized_size_bytes(const SuperNetConfig& cfg) {
  std::uint64_t bytes = kHeaderFixedBytes + config_to_text(cfg).size();
  for (const TensorSpec& t : supernet_layout(cfg)) {
    bytes += static_cast<std::uint64_t>(t.size()) + 4 + kRecordFixedBytes + t.name.size();
  }
  return bytes;
}

}  // namespace dce
