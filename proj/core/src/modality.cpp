#include "dualspeech/modality.hpp"

#include <cmath>

#include "dualspeech/error.hpp"
#include "dualspeech/text.hpp"

namespace dualspeech {

const char* to_string(Domain domain) { return domain == Domain::Speech ? "speech" : "text"; }

const char* to_string(DirectionTag dir) { return dir == DirectionTag::LeftToRight ? "l2r" : "r2l"; }

SpeechPrenet SpeechPrenet::init(std::size_t n_mels, std::size_t hidden, std::size_t model_dim,
                                double dropout, std::mt19937_64& rng) {
  SpeechPrenet p;
  p.hidden = Linear::init(n_mels, hidden, rng);
  p.output = Linear::init(hidden, model_dim, rng);
  p.dropout = dropout;
  return p;
}

Tensor SpeechPrenet::operator()(const Tensor& frames, const ForwardContext& ctx) const {
  DUALSPEECH_EXPECT(frames.rank() == 3 && frames.dim(2) == hidden.weight.dim(0),
                    "speech_input: frames must be [batch, time, n_mels]");
  return output(maybe_dropout(ops::relu(hidden(frames)), dropout, ctx));
}

void SpeechPrenet::collect(const std::string& prefix, ParameterList& out) const {
  hidden.collect(prefix + ".hidden", out);
  output.collect(prefix + ".output", out);
}

SpeechOutputHead SpeechOutputHead::init(std::size_t model_dim, std::size_t n_mels,
                                        std::size_t postnet_hidden, std::size_t postnet_layers,
                                        std::size_t kernel, std::mt19937_64& rng) {
  DUALSPEECH_EXPECT(postnet_layers >= 1, "post-net needs at least one layer");
  SpeechOutputHead head;
  head.stop = Linear::init(model_dim, 1, rng);
  head.mel = Linear::init(model_dim, n_mels, rng);
  for (std::size_t i = 0; i < postnet_layers; ++i) {
    const std::size_t in = i == 0 ? n_mels : postnet_hidden;
    const bool last = i + 1 == postnet_layers;
    const std::size_t out = last ? n_mels : postnet_hidden;
    ConvLayer layer;
    if (last) {
      layer.weight = Tensor::zeros({kernel, in, out}, true);
    } else {
      const double limit = std::sqrt(6.0 / static_cast<double>(kernel * (in + out)));
      layer.weight = uniform_parameter({kernel, in, out}, limit, rng);
    }
    layer.bias = Tensor::zeros({out}, true);
    head.postnet.push_back(std::move(layer));
  }
  return head;
}

Tensor SpeechOutputHead::run_postnet(const Tensor& mel_before, ops::Lengths lengths) const {
  // Padded frames are zeroed between layers so they never leak into valid ones.
  Tensor x = ops::mask_time(mel_before, lengths);
  for (std::size_t i = 0; i < postnet.size(); ++i) {
    x = ops::conv1d(x, postnet[i].weight, postnet[i].bias);
    if (i + 1 < postnet.size()) x = ops::tanh(x);
    x = ops::mask_time(x, lengths);
  }
  return x;
}

SpeechOutputs SpeechOutputHead::operator()(const Tensor& hidden, ops::Lengths lengths) const {
  DUALSPEECH_EXPECT(hidden.rank() == 3 && hidden.dim(2) == mel.weight.dim(0),
                    "speech_output: hidden must be [batch, time, model_dim]");
  SpeechOutputs out;
  out.mel_before = mel(hidden);
  out.mel_after = ops::add(out.mel_before, run_postnet(out.mel_before, lengths));
  out.stop_prob = ops::sigmoid(stop(hidden));
  return out;
}

void SpeechOutputHead::collect(const std::string& prefix, ParameterList& out) const {
  stop.collect(prefix + ".stop", out);
  mel.collect(prefix + ".mel", out);
  for (std::size_t i = 0; i < postnet.size(); ++i) {
    const std::string p = prefix + ".postnet" + std::to_string(i);
    out.push_back({p + ".weight", postnet[i].weight});
    out.push_back({p + ".bias", postnet[i].bias});
  }
}

TiedPhonemeEmbedding TiedPhonemeEmbedding::init(std::size_t vocab, std::size_t model_dim,
                                                std::mt19937_64& rng) {
  return {normal_parameter({vocab, model_dim}, 1.0 / std::sqrt(static_cast<double>(model_dim)), rng)};
}

Tensor TiedPhonemeEmbedding::embed(std::span<const std::int32_t> ids, std::size_t batch,
                                   std::size_t time) const {
  std::vector<std::int32_t> rows(ids.begin(), ids.end());
  for (std::int32_t& id : rows) {
    DUALSPEECH_EXPECT(id >= 0 && static_cast<std::size_t>(id) < vocab_size(),
                      "text_input: phoneme id out of range");
    if (id == PhonemeVocab::kPad || id == PhonemeVocab::kMask) id = ops::kZeroRow;
  }
  const double factor = std::sqrt(static_cast<double>(table.dim(1)));
  return ops::scale(ops::embedding(table, rows, batch, time), factor);
}

Tensor TiedPhonemeEmbedding::project(const Tensor& hidden) const {
  return ops::matmul_transposed(hidden, table);
}

DirectionStartEmbeddings DirectionStartEmbeddings::init(std::size_t model_dim, std::mt19937_64& rng) {
  DirectionStartEmbeddings s;
  for (Tensor& v : s.vectors) v = normal_parameter({model_dim}, 1.0, rng);
  return s;
}

std::size_t DirectionStartEmbeddings::index(Domain domain, DirectionTag dir) {
  return (domain == Domain::Speech ? 0 : 2) + (dir == DirectionTag::LeftToRight ? 0 : 1);
}

const Tensor& DirectionStartEmbeddings::get(Domain domain, DirectionTag dir) const {
  return vectors[index(domain, dir)];
}

void DirectionStartEmbeddings::collect(const std::string& prefix, ParameterList& out) const {
  for (Domain d : {Domain::Speech, Domain::Text})
    for (DirectionTag t : {DirectionTag::LeftToRight, DirectionTag::RightToLeft})
      out.push_back({prefix + "." + to_string(d) + "_" + to_string(t), get(d, t)});
}

}  // namespace dualspeech
