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


#include "cli.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>

#include "phrasegen/common.hpp"
#include "phrasegen/config.hpp"
#include "phrasegen/data.hpp"
#include "phrasegen/metrics.hpp"
#include "phrasegen/pipeline.hpp"
#include "phrasegen/training.hpp"

namespace fs = std::filesystem;

namespace phrasegen::cli {

namespace {

struct GlobalOptions {
  std::string config_file;
  std::string preset = "full";
  std::string data_dir;
  std::string run_dir = "runs/default";
  std::string log_level = "info";
  std::vector<std::string> overrides;
};

// "model.n_stages=2" -> {"model": {"n_stages": 2}}. The value is parsed as
// JSON when possible, otherwise taken as a string.
nlohmann::json dotted_patch(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  nlohmann::json value = nlohmann::json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  std::vector<std::string> parts;
  for (std::size_t start = 0;;) {
    const auto dot = key.find('.', start);
    parts.push_back(key.substr(start, dot - start));
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  for (auto it = parts.rbegin(); it != parts.rend(); ++it) value = nlohmann::json{{*it, value}};
  return value;
}

Config effective_config(const GlobalOptions& g) {
  Config cfg = g.preset == "desk" ? Config::desk() : Config::full_scale();
  if (const char* env = std::getenv(kDataDirEnv); env != nullptr && *env != '\0') cfg.data.data_dir = env;
  if (!g.config_file.empty()) cfg = load_config_file(g.config_file, cfg);
  for (const auto& o : g.overrides) cfg.merge(dotted_patch(o));
  if (!g.data_dir.empty()) cfg.data.data_dir = g.data_dir;
  cfg.validate();
  return cfg;
}

fs::path dataset_dir(const Config& cfg) {
  if (cfg.data.data_dir.empty()) {
    throw ConfigError(std::string("no dataset directory: pass --data, set data.data_dir or ") + kDataDirEnv);
  }
  return cfg.data.data_dir;
}

std::vector<std::string> split_list(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, sep)) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

std::vector<Box> parse_boxes(const std::string& text) {
  std::vector<Box> boxes;
  for (const auto& item : split_list(text, ';')) {
    const auto v = split_list(item, ',');
    if (v.size() != 4) throw ConfigError("box '" + item + "' needs four comma separated values");
    try {
      boxes.push_back(Box{std::stod(v[0]), std::stod(v[1]), std::stod(v[2]), std::stod(v[3])});
    } catch (const std::exception&) {
      throw ConfigError("box '" + item + "' has a non-numeric value");
    }
  }
  return boxes;
}

log::Level parse_level(const std::string& s) {
  if (s == "debug") return log::Level::kDebug;
  if (s == "warn") return log::Level::kWarn;
  if (s == "error") return log::Level::kError;
  return log::Level::kInfo;
}

int report_error(std::ostream& err, const std::string& kind, const std::string& message) {
  err << "error[" << kind << "]: " << message << '\n';
  return kind == "prerequisite" ? kExitPrerequisite : kExitFailure;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Scene image generation from object labels and a caption", "phrasegen"};
  app.require_subcommand(1);
  app.fallthrough();
  GlobalOptions g;
  app.add_option("--config", g.config_file, "JSON config file layered over the preset")->check(CLI::ExistingFile);
  app.add_option("--preset", g.preset, "Base defaults")->check(CLI::IsMember({"full", "desk"}))->capture_default_str();
  app.add_option("--data", g.data_dir, std::string("Dataset directory (else data.data_dir, else $") + kDataDirEnv + ")");
  app.add_option("--run", g.run_dir, "Run directory for checkpoints, metrics and manifests")->capture_default_str();
  app.add_option("--set", g.overrides, "Config override key=value, e.g. train.lr=1e-4 (repeatable)");
  app.add_option("--log-level", g.log_level, "debug|info|warn|error")
      ->check(CLI::IsMember({"debug", "info", "warn", "error"}))
      ->capture_default_str();

  auto* synth = app.add_subcommand("make-synthetic", "Write a procedurally drawn shape dataset");
  SyntheticOptions opts;
  std::string synth_out;
  synth->add_option("--out", synth_out, "Output directory (default: the dataset directory)");
  synth->add_option("--images", opts.n_images, "Number of images")->capture_default_str();
  synth->add_option("--categories", opts.n_categories, "Number of shape categories")->capture_default_str();
  synth->add_option("--image-size", opts.image_size, "Image side in pixels")->capture_default_str();
  synth->add_option("--seed", opts.seed, "Generator seed")->capture_default_str();

  auto* prepare = app.add_subcommand("prepare-data", "Filter annotations and write train/val/test splits");

  auto* pre_text = app.add_subcommand("pretrain-text", "Pretrain the caption encoder with word-level matching");
  auto* pre_damsm = app.add_subcommand("pretrain-damsm", "Pretrain relation and graph encoders with phrase matching");

  auto* train = app.add_subcommand("train", "Adversarial training of the generator");
  bool resume = false;
  std::optional<std::int64_t> max_steps;
  std::optional<int> iterations, batch_size;
  train->add_flag("--resume", resume, "Continue from <run>/train/latest.pt");
  train->add_option("--max-steps", max_steps, "Stop after this many steps in this invocation");
  train->add_option("--iterations", iterations, "Override train.iterations");
  train->add_option("--batch-size", batch_size, "Override train.batch_size");

  auto* generate = app.add_subcommand("generate", "Generate an image from object names and a caption");
  GenerationRequest request;
  std::string objects, boxes, gen_out, gen_ckpt;
  generate->add_option("--objects", objects, "Comma separated category names")->required();
  generate->add_option("--caption", request.caption, "Caption text")->required();
  generate->add_option("--seed", request.seed, "Noise seed")->capture_default_str();
  generate->add_option("--stages", request.stages, "Number of stages to emit (0 = all)")->capture_default_str();
  generate->add_option("--box-source", request.box_source, "predicted|ground_truth")
      ->check(CLI::IsMember({"predicted", "ground_truth"}))
      ->capture_default_str();
  generate->add_option("--boxes", boxes, "Normalized boxes 'x0,y0,x1,y1;...' for ground_truth");
  generate->add_option("--checkpoint", gen_ckpt, "Trainer checkpoint (default <run>/train/latest.pt)");
  generate->add_option("--out", gen_out, "Output directory (default <run>/generated)");

  auto* evaluate_cmd = app.add_subcommand("evaluate", "Inception Score / FID of generated samples");
  EvaluationRequest eval;
  std::string eval_ckpt;
  int grid_examples = 4;
  evaluate_cmd->add_option("--checkpoint", eval_ckpt, "Trainer checkpoint (default <run>/train/latest.pt)");
  evaluate_cmd->add_option("--split", eval.split, "train|val|test")
      ->check(CLI::IsMember({"train", "val", "test"}))
      ->capture_default_str();
  evaluate_cmd->add_option("--metric", eval.metric, "is|fid|both")
      ->check(CLI::IsMember({"is", "fid", "both"}))
      ->capture_default_str();
  evaluate_cmd->add_option("--n-images", eval.n_images, "Number of generated samples")->capture_default_str();
  evaluate_cmd->add_option("--seed", eval.seed, "Noise seed")->capture_default_str();
  evaluate_cmd->add_option("--grid", grid_examples, "Rows of the sample grid (0 = none)")->capture_default_str();

  auto* dump = app.add_subcommand("config-dump", "Print the effective configuration");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    log::set_level(parse_level(g.log_level));
    Config cfg = effective_config(g);
    if (train->parsed()) {
      if (iterations) cfg.train.iterations = *iterations;
      if (batch_size) cfg.train.batch_size = *batch_size;
      cfg.validate();
    }
    const fs::path run_dir = g.run_dir;

    if (dump->parsed()) {
      out << cfg.to_json().dump(2) << '\n';
      const auto& lambda = cfg.train.weights.lambda;
      out << "lambda (";
      for (std::size_t i = 0; i < lambda.size(); ++i) out << (i ? ", " : "") << lambda[i];
      out << ")\n";
    } else if (synth->parsed()) {
      const fs::path dir = synth_out.empty() ? dataset_dir(cfg) : fs::path(synth_out);
      make_synthetic_dataset(dir, opts);
      RunManifest manifest("make-synthetic", cfg);
      manifest.set("synthetic", {{"images", opts.n_images},
                                 {"categories", opts.n_categories},
                                 {"image_size", opts.image_size},
                                 {"seed", opts.seed}});
      manifest.artifact("dataset", dir);
      manifest.write(dir / "make-synthetic.manifest.json");
      out << "wrote synthetic dataset to " << dir.string() << '\n';
    } else if (prepare->parsed()) {
      const auto dir = dataset_dir(cfg);
      auto splits = build_splits(dir, cfg.data, cfg.model.word_dim);
      RunManifest manifest("prepare-data", cfg);
      manifest.set("counts", {{"train", splits.train.records.size()},
                              {"val", splits.val.records.size()},
                              {"test", splits.test.records.size()}});
      manifest.artifact("splits", dir / "splits");
      manifest.write(dir / "prepare-data.manifest.json");
      out << "train " << splits.train.records.size() << " val " << splits.val.records.size() << " test "
          << splits.test.records.size() << '\n';
    } else if (pre_text->parsed()) {
      auto report = pretrain_text_encoder(cfg, dataset_dir(cfg), run_dir);
      out << "wrote " << report.checkpoint.string() << " (final loss "
          << (report.losses.empty() ? 0.0 : report.losses.back()) << ")\n";
    } else if (pre_damsm->parsed()) {
      auto report = pretrain_phrase_damsm(cfg, dataset_dir(cfg), run_dir);
      out << "wrote " << report.checkpoint.string() << " (final loss "
          << (report.losses.empty() ? 0.0 : report.losses.back()) << ")\n";
    } else if (train->parsed()) {
      Trainer trainer(cfg, dataset_dir(cfg), run_dir);
      trainer.run(resume, max_steps);
      out << "completed " << trainer.completed_steps() << " steps; checkpoint "
          << RunPaths{run_dir}.latest().string() << '\n';
    } else if (generate->parsed()) {
      request.objects = split_list(objects, ',');
      if (!boxes.empty()) request.boxes = parse_boxes(boxes);
      const fs::path ckpt = gen_ckpt.empty() ? RunPaths{run_dir}.latest() : fs::path(gen_ckpt);
      const fs::path dir = gen_out.empty() ? run_dir / "generated" : fs::path(gen_out);
      ScenePipeline pipeline(cfg, dataset_dir(cfg), run_dir, ckpt);
      auto result = pipeline.generate(request);
      auto written = write_generation(dir, request, result);
      RunManifest manifest("generate", cfg);
      manifest.set("request", {{"objects", request.objects},
                               {"caption", request.caption},
                               {"seed", request.seed},
                               {"stages", request.stages},
                               {"box_source", request.box_source}});
      manifest.artifact("checkpoint", ckpt);
      for (const auto& p : written) {
        manifest.artifact(p.stem().string(), p);
        out << p.string() << '\n';
      }
      manifest.write(dir / "generate.manifest.json");
    } else if (evaluate_cmd->parsed()) {
      eval.checkpoint = eval_ckpt.empty() ? RunPaths{run_dir}.latest() : fs::path(eval_ckpt);
      auto report = evaluate(cfg, dataset_dir(cfg), run_dir, eval);
      if (grid_examples > 0) {
        ScenePipeline pipeline(cfg, dataset_dir(cfg), run_dir, eval.checkpoint);
        const auto& idx = eval.split == "train" ? pipeline.data().splits.train
                          : eval.split == "val" ? pipeline.data().splits.val
                                                : pipeline.data().splits.test;
        std::vector<GenerationRequest> rows;
        for (std::size_t i = 0; i < idx.records.size() && static_cast<int>(rows.size()) < grid_examples; ++i) {
          GenerationRequest r;
          const auto& rec = idx.records[i];
          for (const auto& o : rec.objects) r.objects.push_back(idx.category_name(idx.label_of(o.category_id)));
          r.caption = rec.captions.empty() ? std::string() : rec.captions.front();
          r.seed = mix_seed(eval.seed, i);
          rows.push_back(std::move(r));
        }
        if (!rows.empty()) {
          const auto grid = run_dir / ("samples_" + eval.split + ".png");
          emit_sample_grid(pipeline, rows, grid);
          report["sample_grid"] = grid.string();
        }
      }
      out << report.dump(2) << '\n';
    }
    return kExitOk;
  } catch (const PrerequisiteError& e) {
    return report_error(err, e.kind(), "stage=" + e.stage() + ": " + e.what());
  } catch (const Error& e) {
    return report_error(err, e.kind(), e.what());
  } catch (const c10::Error& e) {
    return report_error(err, "torch", e.what_without_backtrace());
  } catch (const std::exception& e) {
    return report_error(err, "internal", e.what());
  }
}

}  // namespace phrasegen::cli
