#include <cmath>
#include <filesystem>
#include <set>

#include "doctest.h"
#include "dualspeech/corpus.hpp"
#include "dualspeech/error.hpp"

using namespace dualspeech;

namespace {

std::vector<Utterance> fake_corpus(std::size_t n) {
  std::vector<Utterance> out;
  for (std::size_t i = 0; i < n; ++i)
    out.push_back({"u" + std::to_string(i), MelSpectrogram{2, {double(i), 0.0}},
                   PhonemeSequence{4, PhonemeVocab::kEos}});
  return out;
}

std::set<std::string> ids(const std::vector<Utterance>& us) {
  std::set<std::string> out;
  for (auto& u : us) out.insert(u.id);
  return out;
}

}  // namespace

TEST_CASE("LJSpeech-sized split") {
  const CorpusPartition p = split_dataset(fake_corpus(13100), SplitConfig{}, 7);
  CHECK(p.paired.size() == 200);
  CHECK(p.speech.size() == 12300);
  CHECK(p.text.size() == 12300);
  CHECK(p.val.size() == 300);
  CHECK(p.test.size() == 300);
  CHECK(upsample_factor(p) == 62);
  for (auto& u : p.speech) CHECK_FALSE(u.text.has_value());
  for (auto& u : p.text) CHECK_FALSE(u.mel.has_value());
}

TEST_CASE("held-out ids never reach training pools") {
  const CorpusPartition p = split_dataset(fake_corpus(1000), SplitConfig{800, 100, 100, 50, false}, 3);
  std::set<std::string> train = ids(p.paired);
  for (auto& s : {ids(p.speech), ids(p.text)}) train.insert(s.begin(), s.end());
  CHECK(train.size() == 800);
  for (auto& id : ids(p.val)) CHECK(train.count(id) == 0);
  for (auto& id : ids(p.test)) CHECK(train.count(id) == 0);
  for (auto& id : ids(p.val)) CHECK(ids(p.test).count(id) == 0);
}

TEST_CASE("disjoint halves split unpaired speech and text") {
  const CorpusPartition p = split_dataset(fake_corpus(1000), SplitConfig{800, 100, 100, 50, true}, 3);
  CHECK(p.speech.size() == 375);
  CHECK(p.text.size() == 375);
  for (auto& id : ids(p.speech)) CHECK(ids(p.text).count(id) == 0);
}

TEST_CASE("split is deterministic in its seed") {
  const auto all = fake_corpus(500);
  const SplitConfig cfg{400, 50, 50, 20, false};
  CHECK(ids(split_dataset(all, cfg, 9).test) == ids(split_dataset(all, cfg, 9).test));
  CHECK(ids(split_dataset(all, cfg, 9).test) != ids(split_dataset(all, cfg, 10).test));
  CHECK_THROWS_AS(split_dataset(all, SplitConfig{}, 1), ContractViolation);
}

TEST_CASE("upsampling factor") {
  CorpusPartition p;
  p.paired = fake_corpus(10);
  p.speech = fake_corpus(10);
  p.text = fake_corpus(10);
  CHECK(upsample_factor(p) == 1);
  p.speech = fake_corpus(25);
  CHECK(upsample_factor(p) == 3);
  p.speech.clear();
  p.text.clear();
  CHECK(upsample_factor(p) == 1);
  const auto w = upsample_paired(p);
  CHECK(w.size() == 10);
  p.paired.clear();
  CHECK_THROWS_AS(upsample_factor(p), ContractViolation);
}

TEST_CASE("full batch plan is 16 groups of 32") {
  const auto groups = plan_groups(AblationFlags{});
  REQUIRE(groups.size() == 16);
  CorpusPartition p = split_dataset(fake_corpus(400), SplitConfig{300, 50, 50, 20, false}, 1);
  std::mt19937_64 rng(1);
  const BatchPlan plan = make_batch(p, groups, 32, rng);
  CHECK(plan.total_sequences() == 512);
  CHECK(plan.count(LossKind::Dae) == 4);
  CHECK(plan.count(LossKind::Dt) == 8);
  CHECK(plan.count(LossKind::Sup) == 4);
  for (auto& g : plan.groups) CHECK(g.items.size() == 32);
  std::set<std::string> names;
  for (auto& g : groups) names.insert(g.name());
  CHECK(names.size() == 16);
}

TEST_CASE("ablations drop exactly their groups") {
  CHECK(plan_groups({false, false, false}).size() == 2);
  CHECK(plan_groups({true, false, false}).size() == 4);
  CHECK(plan_groups({true, true, false}).size() == 6);
  CHECK(plan_groups({true, false, true}).size() == 8);
  for (auto& g : plan_groups({true, true, false})) CHECK(g.dir == DirectionTag::LeftToRight);
}

TEST_CASE("batches are reproducible from the rng state") {
  CorpusPartition p = split_dataset(fake_corpus(400), SplitConfig{300, 50, 50, 20, false}, 1);
  std::mt19937_64 r1(5), r2(5);
  const auto g = plan_groups(AblationFlags{});
  const BatchPlan a = make_batch(p, g, 8, r1), b = make_batch(p, g, 8, r2);
  for (std::size_t i = 0; i < a.groups.size(); ++i) CHECK(a.groups[i].items == b.groups[i].items);
  p.text.clear();
  CHECK_THROWS_AS(make_batch(p, g, 8, r1), ContractViolation);
}

TEST_CASE("padding covers exactly the tail") {
  const MelSpectrogram m1{2, {1, 2, 3, 4, 5, 6}}, m2{2, {7, 8}};
  const SpeechBatch sb = speech_batch({&m1, &m2});
  CHECK(sb.lengths == std::vector<std::size_t>{3, 1});
  CHECK(sb.frames.shape() == Shape{2, 3, 2});
  const std::vector<double> expected = {1, 2, 3, 4, 5, 6, 7, 8, 0, 0, 0, 0};
  CHECK(std::vector<double>(sb.frames.data().begin(), sb.frames.data().end()) == expected);
  const SpeechBatch rev = speech_batch({&m1}, true);
  CHECK(std::vector<double>(rev.frames.data().begin(), rev.frames.data().end()) == std::vector<double>{5, 6, 3, 4, 1, 2});

  const PhonemeSequence s1{4, 5, 6, PhonemeVocab::kEos}, s2{7, PhonemeVocab::kEos};
  const TextBatch tb = text_batch({&s1, &s2}, true);
  CHECK(tb.time == 4);
  CHECK(tb.ids == std::vector<std::int32_t>{6, 5, 4, PhonemeVocab::kEos, 7, PhonemeVocab::kEos,
                                            PhonemeVocab::kPad, PhonemeVocab::kPad});
}

TEST_CASE("toy mel arithmetic") {
  ToySpec spec;
  spec.noise = 0.0;
  const MelSpectrogram mel = render_toy_mel(spec, {4, 9, 23, PhonemeVocab::kEos});
  CHECK(mel.n_frames() == 12);
  CHECK(mel.n_mels == 80);
  spec.count = 20;
  const ToyCorpus toy = synthesize_toy_corpus(spec, 3);
  for (auto& u : toy.utterances) {
    const MelSpectrogram clean = render_toy_mel(spec, *u.text);
    REQUIRE(clean.values.size() == u.mel->values.size());
    for (std::size_t i = 0; i < clean.values.size(); ++i)
      CHECK(u.mel->values[i] == static_cast<double>(static_cast<float>(clean.values[i])));
    CHECK(u.text->size() >= spec.min_length + 1);
    CHECK(u.text->size() <= spec.max_length + 1);
  }
}

TEST_CASE("nearest-pattern classifier decodes noisy toy frames") {
  ToySpec spec;
  spec.count = 200;
  const ToyCorpus toy = synthesize_toy_corpus(spec, 11);
  std::size_t right = 0, total = 0;
  for (auto& u : toy.utterances) {
    const auto& text = *u.text;
    for (std::size_t t = 0; t < u.mel->n_frames(); ++t) {
      std::size_t best = 0;
      double best_d = INFINITY;
      for (std::size_t k = 0; k < spec.inventory; ++k) {
        double dist = 0.0;
        for (std::size_t m = 0; m < spec.n_mels; ++m) dist += std::pow(u.mel->at(t, m) - toy.patterns[k][m], 2);
        if (dist < best_d) best_d = dist, best = k;
      }
      right += static_cast<PhonemeId>(best + 4) == text[t / spec.frames_per_phoneme];
      ++total;
    }
  }
  CHECK(static_cast<double>(right) / static_cast<double>(total) > 0.99);
}

TEST_CASE("toy corpus is reproducible and validated") {
  ToySpec spec;
  spec.count = 30;
  const ToyCorpus a = synthesize_toy_corpus(spec, 4), b = synthesize_toy_corpus(spec, 4);
  for (std::size_t i = 0; i < a.utterances.size(); ++i) {
    CHECK(a.utterances[i].mel->values == b.utterances[i].mel->values);
    CHECK(*a.utterances[i].text == *b.utterances[i].text);
  }
  CHECK(min_pattern_distance(spec) > 4 * spec.noise * std::sqrt(80.0));
  spec.noise = 2.0;
  CHECK_THROWS_AS(synthesize_toy_corpus(spec, 4), ContractViolation);
}

TEST_CASE("corpus directory round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "dualspeech_test_corpus";
  std::filesystem::remove_all(dir);
  ToySpec spec;
  spec.count = 5;
  const ToyCorpus toy = synthesize_toy_corpus(spec, 2);
  save_corpus_dir(dir, toy.vocab, toy.utterances);
  const CorpusDir loaded = load_corpus_dir(dir);
  CHECK(loaded.vocab == toy.vocab);
  REQUIRE(loaded.utterances.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(loaded.utterances[i].id == toy.utterances[i].id);
    CHECK(*loaded.utterances[i].mel == *toy.utterances[i].mel);
    CHECK(*loaded.utterances[i].text == *toy.utterances[i].text);
  }
  const auto manifest = read_manifest(dir / "manifest.tsv");
  CHECK(manifest[0].wav_path == "-");
  std::filesystem::remove_all(dir);
  CHECK_THROWS_AS(load_corpus_dir(dir), DataError);
}
