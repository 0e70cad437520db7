// Copyright (c) 2026, The phrasegen Authors. All rights reserved.
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


#include "phrasegen/training.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>

#include "phrasegen/checkpoint.hpp"
#include "phrasegen/common.hpp"
#include "phrasegen/damsm.hpp"
#include "phrasegen/version.hpp"

namespace fs = std::filesystem;
namespace F = torch::nn::functional;

namespace phrasegen {

namespace {

constexpr std::uint64_t kTextStream = 0x74657874;    // "text"
constexpr std::uint64_t kPhraseStream = 0x70687261;  // "phra"

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

std::string text_fingerprint(const ModelConfig& m) {
  nlohmann::json j{{"word_dim", m.word_dim}, {"text_embed_dim", m.text_embed_dim}, {"text_hidden", m.text_hidden}};
  return hex64(fnv1a(j.dump()));
}

std::string graph_fingerprint(const ModelConfig& m) {
  nlohmann::json j{{"text", text_fingerprint(m)}, {"noise_dim", m.noise_dim},       {"phrase_dim", m.phrase_dim},
                   {"ire_hidden", m.ire_hidden},  {"gconv_hidden", m.gconv_hidden}, {"gconv_layers", m.gconv_layers},
                   {"head_hidden", m.head_hidden}, {"head_width", m.head_width}};
  return hex64(fnv1a(j.dump()));
}

torch::optim::Adam make_adam(std::vector<torch::Tensor> params, double lr, const TrainConfig& t) {
  return torch::optim::Adam(std::move(params),
                            torch::optim::AdamOptions(lr).betas({t.adam_beta1, t.adam_beta2}));
}

std::vector<torch::Tensor> trainable(const torch::nn::Module& m) {
  std::vector<torch::Tensor> out;
  for (const auto& p : m.parameters(true)) {
    if (p.requires_grad()) out.push_back(p);
  }
  return out;
}

void append(std::vector<torch::Tensor>& into, const std::vector<torch::Tensor>& from) {
  into.insert(into.end(), from.begin(), from.end());
}

torch::Tensor stack_field(const std::vector<SceneCondition>& conds, torch::Tensor (*get)(const SceneCondition&)) {
  std::vector<torch::Tensor> rows;
  rows.reserve(conds.size());
  for (const auto& c : conds) rows.push_back(get(c));
  return torch::stack(rows);
}

torch::Tensor global_of(const SceneCondition& c) { return c.graph.global; }
torch::Tensor sentence_of(const SceneCondition& c) { return c.sentence; }

MatchingBatch word_batch(const WordFeatures& wf, const torch::Tensor& lengths, const RegionFeatures& rf) {
  MatchingBatch mb;
  for (std::int64_t b = 0; b < lengths.size(0); ++b) {
    mb.queries.push_back(wf.words[b].narrow(1, 0, lengths[b].item<std::int64_t>()).t());
  }
  mb.regions = rf.regions;
  mb.global_queries = wf.sentence;
  mb.global_keys = rf.global;
  return mb;
}

MatchingBatch phrase_batch(const std::vector<SceneCondition>& conds, const RegionFeatures& rf) {
  MatchingBatch mb;
  for (const auto& c : conds) mb.queries.push_back(c.graph.phrases);
  mb.regions = rf.regions;
  mb.global_queries = stack_field(conds, &global_of);
  mb.global_keys = rf.global;
  return mb;
}

void write_jsonl(std::ofstream& out, const nlohmann::json& record) {
  out << record.dump() << '\n';
  out.flush();
}

// Keeps only records with step < `limit`, so a resumed run appends after
// the checkpointed step.
void truncate_metrics(const fs::path& path, std::int64_t limit) {
  if (!fs::exists(path)) return;
  std::ifstream in(path);
  std::vector<std::string> kept;
  for (std::string line; std::getline(in, line);) {
    if (line.empty()) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (!j.is_discarded() && j.value("step", limit) < limit) kept.push_back(line);
  }
  in.close();
  std::ofstream out(path, std::ios::trunc);
  for (const auto& l : kept) out << l << '\n';
}

void load_text_encoder(TextEncoder& te, const DataContext& data, const Config& cfg, const RunPaths& paths) {
  if (!fs::exists(paths.text_encoder())) {
    throw PrerequisiteError("pretrain-text", "caption encoder checkpoint '" + paths.text_encoder().string() +
                                                 "' not found; run `phrasegen pretrain-text` first");
  }
  CheckpointReader r(paths.text_encoder(), "text-encoder");
  r.require("vocab_hash", data.vocab.hash(), "vocabulary");
  r.require("text_model", text_fingerprint(cfg.model), "caption encoder architecture");
  r.module("text", *te);
}

}  // namespace

fs::path RunPaths::step_checkpoint(std::int64_t step) const {
  std::ostringstream os;
  os << "step_" << std::setw(6) << std::setfill('0') << step << ".pt";
  return train_dir() / os.str();
}

RunManifest::RunManifest(std::string command, const Config& cfg) {
  doc_["command"] = std::move(command);
  doc_["config"] = cfg.to_json();
  doc_["config_hash"] = cfg.hash();
  doc_["code_version"] = PHRASEGEN_VERSION;
  doc_["seeds"] = {{"data", cfg.data.seed}, {"train", cfg.train.seed}};
  doc_["started"] = utc_now();
  doc_["artifacts"] = nlohmann::json::object();
}

void RunManifest::artifact(const std::string& role, const fs::path& path) { doc_["artifacts"][role] = path.string(); }

void RunManifest::set(const std::string& key, nlohmann::json value) { doc_[key] = std::move(value); }

void RunManifest::write(const fs::path& path) {
  doc_["finished"] = utc_now();
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  out << doc_.dump(2) << '\n';
}

std::string model_fingerprint(const ModelConfig& model) {
  Config c;
  c.model = model;
  return hex64(fnv1a(c.to_json()["model"].dump()));
}

DataContext DataContext::load(const fs::path& dataset_dir) {
  return DataContext{load_splits(dataset_dir), load_vocabulary(dataset_dir)};
}

ExampleLoader DataContext::loader(const DatasetIndex& index, std::vector<int> resolutions, const Config& cfg) const {
  return ExampleLoader(index, vocab, std::move(resolutions), cfg.data.max_caption_len, cfg.train.seed);
}

std::vector<int> stage_resolutions(const ModelConfig& model) {
  std::vector<int> out;
  for (int s = 0; s < model.n_stages; ++s) out.push_back(model.resolution(s));
  return out;
}

SceneEncoder make_scene_encoder(const DataContext& data, const Config& cfg) {
  auto loader = data.loader(data.splits.train, {}, cfg);
  return SceneEncoder(data.vocab.embeddings().clone(), loader.category_embeddings(), cfg.model);
}

PretrainReport pretrain_text_encoder(const Config& cfg, const fs::path& dataset_dir, const fs::path& run_dir) {
  cfg.validate();
  const auto data = DataContext::load(dataset_dir);
  const RunPaths paths{run_dir};
  fs::create_directories(run_dir);
  RunManifest manifest("pretrain-text", cfg);
  const auto& pc = cfg.text_pretrain;
  const auto seed = mix_seed(cfg.train.seed, kTextStream);
  auto loader = data.loader(data.splits.train, {stage_resolutions(cfg.model).back()}, cfg);

  torch::manual_seed(seed);
  auto backbones = load_backbones(cfg.model.backbone);
  TextEncoder te(data.vocab.size(), cfg.model);
  RegionEncoder region(backbones.inception, cfg.model.word_feature_dim());
  auto params = trainable(*te);
  append(params, trainable(*region));
  auto opt = make_adam(params, pc.lr, cfg.train);

  std::ofstream trace(paths.pretrain_metrics("pretrain_text"), std::ios::trunc);
  PretrainReport report;
  te->train();
  region->train();
  for (int step = 0; step < pc.steps; ++step) {
    auto gen = make_generator(mix_seed(seed, static_cast<std::uint64_t>(step)));
    Batch batch = load_batch(loader, step, pc.batch_size, seed);
    auto wf = te(batch.caption_ids, batch.caption_lengths);
    auto rf = region(batch.images[0], gen);
    auto loss = damsm_loss(word_batch(wf, batch.caption_lengths, rf), cfg.gamma);
    opt.zero_grad();
    loss.backward();
    opt.step();
    const double value = loss.item<double>();
    report.losses.push_back(value);
    write_jsonl(trace, {{"step", step}, {"loss", value}});
    if (pc.log_every > 0 && step % pc.log_every == 0) log::info("pretrain-text step ", step, " loss ", value);
  }

  CheckpointWriter w("text-encoder");
  w.meta("vocab_hash", data.vocab.hash())
      .meta("text_model", text_fingerprint(cfg.model))
      .meta("steps", std::to_string(pc.steps))
      .meta("backbone", backbones.provenance())
      .module("text", *te)
      .module("region", *region);
  w.save(paths.text_encoder());
  report.checkpoint = paths.text_encoder();
  manifest.artifact("checkpoint", paths.text_encoder());
  manifest.artifact("metrics", paths.pretrain_metrics("pretrain_text"));
  manifest.write(paths.manifest("pretrain-text"));
  return report;
}

PretrainReport pretrain_phrase_damsm(const Config& cfg, const fs::path& dataset_dir, const fs::path& run_dir) {
  cfg.validate();
  const auto data = DataContext::load(dataset_dir);
  const RunPaths paths{run_dir};
  const auto& pc = cfg.phrase_pretrain;
  const auto seed = mix_seed(cfg.train.seed, kPhraseStream);

  torch::manual_seed(seed);
  auto scene = make_scene_encoder(data, cfg);
  load_text_encoder(scene->text, data, cfg, paths);
  freeze(*scene->text);
  RunManifest manifest("pretrain-damsm", cfg);
  auto backbones = load_backbones(cfg.model.backbone);
  RegionEncoder region(backbones.inception, cfg.model.phrase_dim);
  auto params = trainable(*scene);
  append(params, trainable(*region));
  auto opt = make_adam(params, pc.lr, cfg.train);
  auto loader = data.loader(data.splits.train, {stage_resolutions(cfg.model).back()}, cfg);

  std::ofstream trace(paths.pretrain_metrics("pretrain_damsm"), std::ios::trunc);
  PretrainReport report;
  scene->train();
  scene->text->eval();
  region->train();
  for (int step = 0; step < pc.steps; ++step) {
    auto gen = make_generator(mix_seed(seed, static_cast<std::uint64_t>(step)));
    Batch batch = load_batch(loader, step, pc.batch_size, seed);
    auto noise = torch::randn({batch.size(), cfg.model.noise_dim}, gen);
    auto conds = scene(batch.caption_ids, batch.caption_lengths, batch.labels, noise);
    auto rf = region(batch.images[0], gen);
    auto loss = damsm_loss(phrase_batch(conds, rf), cfg.gamma);
    opt.zero_grad();
    loss.backward();
    opt.step();
    const double value = loss.item<double>();
    report.losses.push_back(value);
    write_jsonl(trace, {{"step", step}, {"loss", value}});
    if (pc.log_every > 0 && step % pc.log_every == 0) log::info("pretrain-damsm step ", step, " loss ", value);
  }

  CheckpointWriter w("phrase-damsm");
  w.meta("vocab_hash", data.vocab.hash())
      .meta("graph_model", graph_fingerprint(cfg.model))
      .meta("num_categories", std::to_string(data.num_categories()))
      .meta("steps", std::to_string(pc.steps))
      .meta("backbone", backbones.provenance())
      .module("scene", *scene)
      .module("region", *region);
  w.save(paths.phrase_damsm());
  report.checkpoint = paths.phrase_damsm();
  manifest.artifact("checkpoint", paths.phrase_damsm());
  manifest.artifact("metrics", paths.pretrain_metrics("pretrain_damsm"));
  manifest.write(paths.manifest("pretrain-damsm"));
  return report;
}

FrozenConditioning load_conditioning(const Config& cfg, const DataContext& data, const RunPaths& paths) {
  if (!fs::exists(paths.phrase_damsm())) {
    throw PrerequisiteError("pretrain-damsm", "phrase matching checkpoint '" + paths.phrase_damsm().string() +
                                                  "' not found; run `phrasegen pretrain-damsm` first");
  }
  FrozenConditioning f;
  f.backbones = load_backbones(cfg.model.backbone);
  f.scene = make_scene_encoder(data, cfg);
  f.region = RegionEncoder(f.backbones.inception, cfg.model.phrase_dim);
  CheckpointReader r(paths.phrase_damsm(), "phrase-damsm");
  r.require("vocab_hash", data.vocab.hash(), "vocabulary");
  r.require("graph_model", graph_fingerprint(cfg.model), "graph encoder architecture");
  r.require("num_categories", std::to_string(data.num_categories()), "category set");
  r.module("scene", *f.scene);
  r.module("region", *f.region);
  freeze(*f.scene);
  freeze(*f.region);
  return f;
}

double retrieval_accuracy(const torch::Tensor& s) {
  const auto M = s.size(0);
  if (M < 2) throw ShapeError("retrieval accuracy needs at least two pairs");
  auto diag = s.diagonal().unsqueeze(1);
  auto wins = (diag > s).to(torch::kDouble);
  return wins.sum().item<double>() / static_cast<double>(M * (M - 1));
}

DiscriminatorSetImpl::DiscriminatorSetImpl(const ModelConfig& cfg, const DiscriminatorEnable& enable,
                                           std::int64_t num_classes) {
  patch_unc = register_module("patch_unc", torch::nn::ModuleList());
  patch_ig = register_module("patch_ig", torch::nn::ModuleList());
  patch_cap = register_module("patch_cap", torch::nn::ModuleList());
  for (int s = 0; s < cfg.n_stages; ++s) {
    const auto res = cfg.resolution(s);
    if (enable.patch_unc) patch_unc->push_back(PatchDiscriminator(res, cfg.disc_channels));
    if (enable.patch_ig) patch_ig->push_back(PatchDiscriminator(res, cfg.disc_channels, cfg.phrase_dim));
    if (cfg.use_caption_patch_d) {
      patch_cap->push_back(PatchDiscriminator(res, cfg.disc_channels, cfg.word_feature_dim()));
    }
  }
  if (enable.object) {
    object = register_module("object", ObjectDiscriminator(cfg.disc_channels, cfg.obj_disc_hidden, num_classes));
  }
  const bool phrase_ok = cfg.resolution(cfg.n_stages - 1) >= 256 || cfg.phrase_d_upsampled;
  if (enable.phrase_unc && phrase_ok) {
    phrase_unc = register_module("phrase_unc", PhraseDiscriminator(kCropFeatureChannels, cfg.phrase_disc_channels));
  }
  if (enable.phrase_con && phrase_ok) {
    phrase_con = register_module("phrase_con", PhraseDiscriminator(cfg.phrase_dim, cfg.phrase_disc_channels));
  }
}

Trainer::Trainer(Config cfg, const fs::path& dataset_dir, const fs::path& run_dir)
    : cfg_(std::move(cfg)), paths_{run_dir} {
  cfg_.validate();
  data_ = DataContext::load(dataset_dir);
  frozen_ = load_conditioning(cfg_, data_, paths_);
  loader_ = std::make_unique<ExampleLoader>(data_.loader(data_.splits.train, stage_resolutions(cfg_.model), cfg_));
  torch::manual_seed(cfg_.train.seed);
  generator_ = Generator(cfg_.model);
  discriminators_ = DiscriminatorSet(cfg_.model, cfg_.train.enable, data_.num_categories());
  g_opt_ = std::make_unique<torch::optim::Adam>(make_adam(generator_->parameters(), cfg_.train.lr, cfg_.train));
  d_opt_ = std::make_unique<torch::optim::Adam>(make_adam(discriminators_->parameters(), cfg_.train.lr, cfg_.train));
}

nlohmann::json Trainer::step(std::int64_t index) {
  const auto& m = cfg_.model;
  const int last = m.n_stages - 1;
  auto gen = make_generator(mix_seed(cfg_.train.seed, static_cast<std::uint64_t>(index)));
  Batch batch = load_batch(*loader_, index, cfg_.train.batch_size, cfg_.train.seed);
  const auto B = batch.size();
  auto noise = torch::randn({B, m.noise_dim}, gen);

  std::vector<SceneCondition> conds;
  {
    torch::NoGradGuard no_grad;
    conds = frozen_.scene(batch.caption_ids, batch.caption_lengths, batch.labels, noise);
  }
  generator_->train();
  discriminators_->train();
  auto out = generator_(conds, batch.boxes);

  auto global = stack_field(conds, &global_of);
  auto sentence = stack_field(conds, &sentence_of);
  auto labels = torch::cat(batch.labels);
  auto& D = *discriminators_;
  const bool use_phrase = static_cast<bool>(D.phrase_unc) || static_cast<bool>(D.phrase_con);
  PhraseSelection sel;
  torch::Tensor relations;
  if (use_phrase) {
    std::vector<torch::Tensor> pairs;
    for (const auto& c : conds) pairs.push_back(c.pairs);
    sel = select_phrases(pairs, m.phrase_pairs_per_image, gen);
    std::vector<torch::Tensor> rows;
    for (std::int64_t k = 0; k < sel.example.size(0); ++k) {
      rows.push_back(conds[sel.example[k].item<std::int64_t>()].relation.relations[sel.phrase[k].item<std::int64_t>()]);
    }
    relations = torch::stack(rows);
  }

  nlohmann::json rec;
  rec["step"] = index;

  // Discriminator step on detached fakes.
  d_opt_->zero_grad();
  auto d_total = torch::zeros({});
  auto add_d = [&](const std::string& name, const torch::Tensor& loss) {
    rec["d_" + name] = rec.value("d_" + name, 0.0) + loss.item<double>();
    d_total = d_total + loss;
  };
  for (int s = 0; s <= last; ++s) {
    const auto& real = batch.images[s];
    auto fake = out.images[s].detach();
    if (!D.patch_unc->is_empty()) {
      auto p = D.patch_unc[s]->as<PatchDiscriminator>();
      auto r = p->forward(real);
      auto f = p->forward(fake);
      add_d("patch_unc", discriminator_loss(r, f));
      if (s == last) {
        rec["d_real_score"] = r.mean().item<double>();
        rec["d_fake_score"] = f.mean().item<double>();
      }
    }
    if (!D.patch_ig->is_empty()) {
      auto p = D.patch_ig[s]->as<PatchDiscriminator>();
      add_d("patch_ig", conditional_discriminator_loss(p->forward(real, global), p->forward(fake, global),
                                                       p->forward(real, mismatch(global))));
    }
    if (!D.patch_cap->is_empty()) {
      auto p = D.patch_cap[s]->as<PatchDiscriminator>();
      add_d("patch_cap", conditional_discriminator_loss(p->forward(real, sentence), p->forward(fake, sentence),
                                                        p->forward(real, mismatch(sentence))));
    }
  }
  const auto& real_last = batch.images[last];
  auto fake_last_detached = out.images[last].detach();
  if (D.object) {
    auto sr = D.object(object_crops(real_last, batch.boxes));
    auto sf = D.object(object_crops(fake_last_detached, batch.boxes));
    add_d("object", discriminator_loss(sr.realness, sf.realness));
    add_d("ac", F::cross_entropy(sr.logits, labels));
    rec["ac_accuracy_real"] = (sr.logits.argmax(1) == labels).to(torch::kDouble).mean().item<double>();
  }
  PhraseCropFeatures real_phr;
  if (use_phrase) {
    PhraseCropFeatures fake_phr;
    {
      torch::NoGradGuard no_grad;
      real_phr = phrase_crop_features(*frozen_.backbones.vgg, real_last, batch.boxes, sel);
      fake_phr = phrase_crop_features(*frozen_.backbones.vgg, fake_last_detached, batch.boxes, sel);
    }
    if (D.phrase_unc) {
      add_d("phrase_unc", discriminator_loss(D.phrase_unc(real_phr.subject, real_phr.predicate, real_phr.object),
                                             D.phrase_unc(fake_phr.subject, fake_phr.predicate, fake_phr.object)));
    }
    if (D.phrase_con) {
      auto rel = tile(relations, real_phr.subject.size(2));
      auto wrong = tile(mismatch(relations), real_phr.subject.size(2));
      add_d("phrase_con", conditional_discriminator_loss(D.phrase_con(real_phr.subject, rel, real_phr.object),
                                                         D.phrase_con(fake_phr.subject, rel, fake_phr.object),
                                                         D.phrase_con(real_phr.subject, wrong, real_phr.object)));
    }
  }
  if (!std::isfinite(d_total.item<double>())) throw NumericError("non-finite discriminator loss: " + rec.dump());
  d_total.backward();
  d_opt_->step();
  rec["d_total"] = d_total.item<double>();

  // Generator step.
  g_opt_->zero_grad();
  LossBundle bundle(cfg_.train.weights);
  auto zero = torch::zeros({});
  for (auto& t : bundle.terms) t = zero;
  for (int s = 0; s <= last; ++s) {
    const auto& fake = out.images[s];
    const auto& real = batch.images[s];
    if (!D.patch_unc->is_empty()) {
      bundle.terms[kGanImage] =
          bundle.terms[kGanImage] + generator_adversarial_loss(D.patch_unc[s]->as<PatchDiscriminator>()->forward(fake));
    }
    if (!D.patch_ig->is_empty()) {
      bundle.terms[kGanImage] = bundle.terms[kGanImage] + generator_adversarial_loss(
                                                              D.patch_ig[s]->as<PatchDiscriminator>()->forward(fake, global));
    }
    if (!D.patch_cap->is_empty()) {
      bundle.terms[kGanImage] = bundle.terms[kGanImage] + generator_adversarial_loss(
                                                              D.patch_cap[s]->as<PatchDiscriminator>()->forward(fake, sentence));
    }
    bundle.terms[kL1Image] = bundle.terms[kL1Image] + (fake - real).abs().mean();
    bundle.terms[kPerceptualImage] = bundle.terms[kPerceptualImage] + perceptual_l1(*frozen_.backbones.vgg, fake, real);
  }
  const auto& fake_last = out.images[last];
  if (D.object) {
    auto sf = D.object(object_crops(fake_last, batch.boxes));
    bundle.terms[kGanObject] = generator_adversarial_loss(sf.realness);
    bundle.terms[kClassObject] = F::cross_entropy(sf.logits, labels);
  }
  if (use_phrase) {
    auto fake_phr = phrase_crop_features(*frozen_.backbones.vgg, fake_last, batch.boxes, sel);
    auto gan = zero;
    if (D.phrase_unc) gan = gan + generator_adversarial_loss(D.phrase_unc(fake_phr.subject, fake_phr.predicate, fake_phr.object));
    if (D.phrase_con) {
      gan = gan + generator_adversarial_loss(
                      D.phrase_con(fake_phr.subject, tile(relations, fake_phr.subject.size(2)), fake_phr.object));
    }
    bundle.terms[kGanPhrase] = gan;
  }
  bundle.terms[kDamsmPhrase] = damsm_loss(phrase_batch(conds, frozen_.region(fake_last, gen)), cfg_.gamma);
  bundle.terms[kBox] = box_l1_loss(out.predicted_boxes, batch.boxes);
  bundle.check_finite();
  auto g_total = bundle.total();
  g_total.backward();
  g_opt_->step();

  const auto values = bundle.values();
  for (const auto& [k, v] : values.items()) rec["g_" + k] = v;
  rec["g_total"] = g_total.item<double>();
  rec["l1_final"] = (fake_last.detach() - real_last).abs().mean().item<double>();
  return rec;
}

void Trainer::save_checkpoint() {
  CheckpointWriter w("train");
  w.meta("step", std::to_string(completed_))
      .meta("model", model_fingerprint(cfg_.model))
      .meta("vocab_hash", data_.vocab.hash())
      .meta("config_hash", cfg_.hash())
      .meta("backbone", frozen_.backbones.provenance())
      .module("generator", *generator_)
      .module("discriminators", *discriminators_)
      .optimizer("generator", *g_opt_)
      .optimizer("discriminators", *d_opt_);
  const auto path = paths_.step_checkpoint(completed_);
  w.save(path);
  fs::copy_file(path, paths_.latest(), fs::copy_options::overwrite_existing);
}

void Trainer::load_checkpoint(const fs::path& path) {
  CheckpointReader r(path, "train");
  r.require("model", model_fingerprint(cfg_.model), "model configuration");
  r.require("vocab_hash", data_.vocab.hash(), "vocabulary");
  r.module("generator", *generator_);
  r.module("discriminators", *discriminators_);
  r.optimizer("generator", *g_opt_);
  r.optimizer("discriminators", *d_opt_);
  try {
    completed_ = std::stoll(r.meta("step"));
  } catch (const std::exception&) {
    throw CheckpointError("checkpoint '" + path.string() + "' has no valid step counter");
  }
}

void Trainer::run(bool resume, std::optional<std::int64_t> max_steps) {
  fs::create_directories(paths_.train_dir());
  if (resume && fs::exists(paths_.latest())) {
    load_checkpoint(paths_.latest());
    log::info("resuming from step ", completed_);
  } else {
    if (resume) log::warn("no checkpoint under ", paths_.train_dir().string(), "; starting from step 0");
    completed_ = 0;
  }
  truncate_metrics(paths_.metrics(), completed_);
  RunManifest manifest("train", cfg_);
  manifest.set("start_step", completed_);

  std::int64_t end = cfg_.train.iterations;
  if (max_steps) end = std::min(end, completed_ + *max_steps);
  std::ofstream metrics(paths_.metrics(), std::ios::app);
  const auto t0 = std::chrono::steady_clock::now();
  while (completed_ < end) {
    auto rec = step(completed_);
    write_jsonl(metrics, rec);
    ++completed_;
    if (cfg_.train.log_every > 0 && (completed_ % cfg_.train.log_every == 0 || completed_ == end)) {
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      log::info("train step ", completed_, "/", end, " g_total ", rec["g_total"].get<double>(), " d_total ",
                rec["d_total"].get<double>(), " (", secs, " s)");
    }
    if ((cfg_.train.checkpoint_every > 0 && completed_ % cfg_.train.checkpoint_every == 0) || completed_ == end) {
      save_checkpoint();
    }
  }
  manifest.set("completed_steps", completed_);
  manifest.artifact("checkpoint", paths_.latest());
  manifest.artifact("metrics", paths_.metrics());
  manifest.write(paths_.manifest("train"));
}

}  // namespace phrasegen
