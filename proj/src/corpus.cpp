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

#include "dce/corpus.hpp"

#include <fstream>
#include <iterator>
#include <random>

#include "dce/binary_io.hpp"

namespace dce {
namespace {

constexpr char kCorpusMagic[] = "DCEC1";
constexpr int kMaxResamples = 10000;

}  // namespace

void CorpusSpec::validate() const {
  if (vocab_size < 2) throw ConfigError("corpus: vocab_size must be >= 2");
  if (feature_dim < 1) throw ConfigError("corpus: feature_dim must be >= 1");
  if (min_frames_per_symbol < 1 || max_frames_per_symbol < min_frames_per_symbol) {
    throw ConfigError("corpus: frames-per-symbol range must satisfy 1 <= a <= b");
  }
  if (min_labels < 1 || max_labels < min_labels) {
    throw ConfigError("corpus: label length range must satisfy 1 <= min <= max");
  }
  if (noise_stddev < 0) throw ConfigError("corpus: noise_stddev must be >= 0");
  if (num_domains < 1) throw ConfigError("corpus: num_domains must be >= 1");
  if (frontend_factor < 1 || encoder_reduction < 1) {
    throw ConfigError("corpus: reduction factors must be >= 1");
  }
}

Mat<float> symbol_prototypes(const CorpusSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Mat<float> protos(spec.vocab_size, spec.feature_dim);
  for (Index v = 0; v < protos.rows(); ++v) {
    for (Index d = 0; d < protos.cols(); ++d) protos(v, d) = static_cast<float>(gauss(rng));
  }
  for (Index a = 0; a < protos.rows(); ++a) {
    for (Index b = a + 1; b < protos.rows(); ++b) {
      if (protos.row(a) == protos.row(b)) throw ConfigError("corpus: duplicate symbol prototypes");
    }
  }
  return protos;
}

Index reduced_length(Index frames, int frontend_factor, int encoder_reduction) {
  const Index after_frontend = (frames + frontend_factor - 1) / frontend_factor;
  return (after_frontend + encoder_reduction - 1) / encoder_reduction;
}

std::vector<Utterance> synth_generate(const CorpusSpec& spec, int n, Split split) {
  if (n < 1) throw ConfigError("synth_generate: n must be >= 1");
  const Mat<float> protos = symbol_prototypes(spec);
  std::seed_seq seq{spec.seed, static_cast<std::uint64_t>(split) + 1, std::uint64_t{0x5eed}};
  std::mt19937_64 rng(seq);
  std::uniform_int_distribution<int> length_dist(spec.min_labels, spec.max_labels);
  std::uniform_int_distribution<int> symbol_dist(1, spec.vocab_size);
  std::uniform_int_distribution<int> duration_dist(spec.min_frames_per_symbol, spec.max_frames_per_symbol);
  std::uniform_int_distribution<int> domain_dist(0, spec.num_domains - 1);
  std::normal_distribution<double> noise(0.0, 1.0);

  std::vector<Utterance> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Utterance utt;
    std::vector<int> durations;
    for (int attempt = 0;; ++attempt) {
      if (attempt == kMaxResamples) {
        throw ConfigError("synth_generate: cannot satisfy lattice feasibility with this spec");
      }
      const int U = length_dist(rng);
      utt.labels.resize(static_cast<std::size_t>(U));
      durations.resize(static_cast<std::size_t>(U));
      int T = 0;
      for (int u = 0; u < U; ++u) {
        utt.labels[u] = symbol_dist(rng);
        durations[u] = duration_dist(rng);
        T += durations[u];
      }
      if (reduced_length(T, spec.frontend_factor, spec.encoder_reduction) >= U) break;
    }
    utt.domain = domain_dist(rng);
    Index T = 0;
    for (int d : durations) T += d;
    utt.frames.resize(T, spec.feature_dim);
    Index row = 0;
    for (std::size_t u = 0; u < utt.labels.size(); ++u) {
      for (int f = 0; f < durations[u]; ++f, ++row) {
        for (Index d = 0; d < spec.feature_dim; ++d) {
          const double clean = protos(utt.labels[u] - 1, d);
          const double jitter = spec.noise_stddev > 0 ? spec.noise_stddev * noise(rng) : 0.0;
          utt.frames(row, d) = static_cast<float>(clean + jitter);
        }
      }
    }
    out.push_back(std::move(utt));
  }
  return out;
}

void write_corpus(const std::string& path, const Corpus& corpus) {
  io::ByteWriter w;
  w.text(kCorpusMagic);
  w.u32(static_cast<std::uint32_t>(corpus.vocab_size));
  w.u32(static_cast<std::uint32_t>(corpus.feature_dim));
  for (const Utterance& u : corpus.utterances) {
    if (u.frames.cols() != corpus.feature_dim) {
      throw DataError("write_corpus: utterance feature dim differs from corpus header");
    }
    w.u32(static_cast<std::uint32_t>(u.frames.rows()));
    w.u32(static_cast<std::uint32_t>(u.labels.size()));
    w.u32(static_cast<std::uint32_t>(u.domain));
    for (Index i = 0; i < u.frames.size(); ++i) w.f32(u.frames.data()[i]);
    for (int l : u.labels) w.u32(static_cast<std::uint32_t>(l));
  }
  io::write_file(path, w.data());
}

Corpus read_corpus(const std::string& path) {
  const std::vector<std::uint8_t> bytes = io::read_file(path);
  io::ByteReader r(bytes.data(), bytes.size(), "corpus " + path);
  if (r.text(5) != kCorpusMagic) throw DataError("corpus " + path + ": bad magic");
  Corpus c;
  c.vocab_size = static_cast<int>(r.u32());
  c.feature_dim = static_cast<int>(r.u32());
  while (!r.done()) {
    Utterance u;
    const std::uint32_t T = r.u32();
    const std::uint32_t U = r.u32();
    u.domain = static_cast<int>(r.u32());
    if (T == 0) throw DataError("corpus " + path + ": utterance with zero frames");
    u.frames.resize(T, c.feature_dim);
    for (Index i = 0; i < u.frames.size(); ++i) u.frames.data()[i] = r.f32();
    u.labels.resize(U);
    for (auto& l : u.labels) {
      l = static_cast<int>(r.u32());
      if (l < 1 || l > c.vocab_size) throw DataError("corpus " + path + ": label out of range");
    }
    c.utterances.push_back(std::move(u));
  }
  return c;
}

namespace io {

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "' for reading");
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write to '" + path + "' failed");
}

}  // namespace io
}  // namespace dce
