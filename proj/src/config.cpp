// Copyright 2026 The advaug Authors. All Rights Reserved.
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

#include "advaug/config.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "advaug/errors.hpp"

namespace advaug {

using nlohmann::json;

static_assert(std::is_same_v<std::uint64_t, unsigned long> && std::is_same_v<std::size_t, unsigned long>,
              "config reader assumes 64-bit size_t");

namespace {

/// Walks one JSON object, tracking which keys were consumed.
class Reader {
 public:
  Reader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigError(where("") + " must be an object", path_.empty() ? "<root>" : path_);
  }

  template <typename T>
  void get(const char* key, T& out) {
    auto it = obj_.find(key);
    if (it == obj_.end()) return;
    used_.insert(key);
    read(*it, out, where(key));
  }

  Reader child(const char* key) {
    used_.insert(key);
    auto it = obj_.find(key);
    static const json empty = json::object();
    return Reader(it == obj_.end() ? empty : *it, where(key));
  }

  bool has(const char* key) const { return obj_.contains(key); }

  void finish() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it) {
      if (!used_.count(it.key())) {
        throw ConfigError("unknown config key '" + where(it.key()) + "'", where(it.key()));
      }
    }
  }

 private:
  std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  static void read(const json& v, double& out, const std::string& key) {
    if (!v.is_number()) throw ConfigError("'" + key + "' must be a number", key);
    out = v.get<double>();
  }
  static void read(const json& v, std::size_t& out, const std::string& key) {
    if (!v.is_number_unsigned()) throw ConfigError("'" + key + "' must be a non-negative integer", key);
    out = v.get<std::size_t>();
  }
  static void read(const json& v, std::string& out, const std::string& key) {
    if (!v.is_string()) throw ConfigError("'" + key + "' must be a string", key);
    out = v.get<std::string>();
  }
  template <typename T>
  static void read(const json& v, std::vector<T>& out, const std::string& key) {
    if (!v.is_array()) throw ConfigError("'" + key + "' must be an array", key);
    out.clear();
    for (std::size_t i = 0; i < v.size(); ++i) {
      T item{};
      read(v[i], item, key + "[" + std::to_string(i) + "]");
      out.push_back(std::move(item));
    }
  }

  const json& obj_;
  std::string path_;
  std::set<std::string> used_;
};

template <typename F>
auto parse_enum(const std::string& text, const std::string& key, F parse) {
  try {
    return parse(text);
  } catch (const InvalidArgument& e) {
    throw ConfigError("'" + key + "': " + e.what(), key);
  }
}

Task parse_task(const std::string& s) {
  if (s == "classification") return Task::classification;
  if (s == "segmentation") return Task::segmentation;
  throw InvalidArgument("unknown task '" + s + "'");
}
const char* task_name(Task t) { return t == Task::classification ? "classification" : "segmentation"; }

GanVariant parse_variant(const std::string& s) {
  if (s == "minimax") return GanVariant::minimax;
  if (s == "nonsaturating") return GanVariant::nonsaturating;
  throw InvalidArgument("unknown gan_variant '" + s + "'");
}
const char* variant_name(GanVariant v) { return v == GanVariant::minimax ? "minimax" : "nonsaturating"; }

void read_adam(Reader r, nn::AdamConfig& c) {
  r.get("lr", c.lr);
  r.get("beta1", c.beta1);
  r.get("beta2", c.beta2);
  r.get("eps", c.eps);
  r.finish();
}

json adam_json(const nn::AdamConfig& c) {
  return {{"lr", c.lr}, {"beta1", c.beta1}, {"beta2", c.beta2}, {"eps", c.eps}};
}

RunConfig from_json(const json& root) {
  RunConfig c;
  Reader r(root, "");
  {
    Reader d = r.child("dataset");
    std::string kind(dataset_kind_name(c.dataset.kind));
    d.get("kind", kind);
    c.dataset.kind = parse_enum(kind, "dataset.kind", parse_dataset_kind);
    d.get("resolution", c.dataset.resolution);
    d.get("channels", c.dataset.channels);
    d.get("num_classes", c.dataset.num_classes);
    d.get("size", c.dataset.size);
    d.get("split", c.dataset.split);
    d.get("seed", c.dataset.seed);
    d.get("path", c.dataset.path);
    std::string task = task_name(c.dataset.folder_task);
    d.get("task", task);
    c.dataset.folder_task = parse_enum(task, "dataset.task", parse_task);
    d.finish();
  }
  {
    Reader m = r.child("model");
    m.get("noise_dim", c.model.noise_dim);
    m.get("noise_channels", c.model.noise_channels);
    m.get("image_widths", c.model.image_widths);
    m.get("trunk_width", c.model.trunk_width);
    m.get("deform_scale", c.model.deform_scale);
    m.get("appear_scale", c.model.appear_scale);
    m.get("discriminator_widths", c.model.discriminator_widths);
    m.get("classifier_widths", c.model.classifier_widths);
    m.get("segmenter_widths", c.model.segmenter_widths);
    m.finish();
  }
  {
    Reader l = r.child("loss");
    l.get("lambda_gan", c.trainer.weights.lambda_gan);
    l.get("gamma_reg", c.trainer.weights.gamma_reg);
    l.get("reverse_scale", c.trainer.reverse_scale);
    std::string variant = variant_name(c.trainer.gan_variant);
    l.get("gan_variant", variant);
    c.trainer.gan_variant = parse_enum(variant, "loss.gan_variant", parse_variant);
    l.finish();
  }
  {
    Reader o = r.child("optim");
    read_adam(o.child("generator"), c.trainer.generator_optim);
    read_adam(o.child("discriminator"), c.trainer.discriminator_optim);
    read_adam(o.child("target"), c.trainer.target_optim);
    o.finish();
  }
  r.get("batch_size", c.trainer.batch_size);
  r.get("epochs", c.trainer.epochs);
  r.get("seed", c.trainer.seed);
  r.get("checkpoint_every", c.trainer.checkpoint_every);
  r.get("out", c.out);
  if (r.has("enabled_generators")) {
    std::vector<std::string> names;
    r.get("enabled_generators", names);
    c.trainer.enabled.clear();
    for (std::size_t i = 0; i < names.size(); ++i) {
      c.trainer.enabled.push_back(
          parse_enum(names[i], "enabled_generators[" + std::to_string(i) + "]", parse_generator_kind));
    }
  }
  r.finish();
  return c;
}

json to_json_value(const RunConfig& c) {
  json enabled = json::array();
  for (GeneratorKind k : c.trainer.enabled) enabled.push_back(std::string(kind_name(k)));
  return {
      {"dataset",
       {{"kind", std::string(dataset_kind_name(c.dataset.kind))},
        {"resolution", c.dataset.resolution},
        {"channels", c.dataset.channels},
        {"num_classes", c.dataset.num_classes},
        {"size", c.dataset.size},
        {"split", c.dataset.split},
        {"seed", c.dataset.seed},
        {"path", c.dataset.path},
        {"task", task_name(c.dataset.folder_task)}}},
      {"model",
       {{"noise_dim", c.model.noise_dim},
        {"noise_channels", c.model.noise_channels},
        {"image_widths", c.model.image_widths},
        {"trunk_width", c.model.trunk_width},
        {"deform_scale", c.model.deform_scale},
        {"appear_scale", c.model.appear_scale},
        {"discriminator_widths", c.model.discriminator_widths},
        {"classifier_widths", c.model.classifier_widths},
        {"segmenter_widths", c.model.segmenter_widths}}},
      {"loss",
       {{"lambda_gan", c.trainer.weights.lambda_gan},
        {"gamma_reg", c.trainer.weights.gamma_reg},
        {"reverse_scale", c.trainer.reverse_scale},
        {"gan_variant", variant_name(c.trainer.gan_variant)}}},
      {"optim",
       {{"generator", adam_json(c.trainer.generator_optim)},
        {"discriminator", adam_json(c.trainer.discriminator_optim)},
        {"target", adam_json(c.trainer.target_optim)}}},
      {"batch_size", c.trainer.batch_size},
      {"epochs", c.trainer.epochs},
      {"seed", c.trainer.seed},
      {"checkpoint_every", c.trainer.checkpoint_every},
      {"out", c.out},
      {"enabled_generators", enabled},
  };
}

json parse_text(std::string_view text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(source + " is not valid JSON: " + e.what(), "<json>");
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path.string(), "<file>");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

ModelConfig RunConfig::model_config() const {
  ModelConfig m;
  m.generator.resolution = dataset.resolution;
  m.generator.channels = dataset.channels;
  m.generator.noise_dim = model.noise_dim;
  m.generator.noise_channels = model.noise_channels;
  m.generator.image_widths = model.image_widths;
  m.generator.trunk_width = model.trunk_width;
  m.generator.deform_scale = model.deform_scale;
  m.generator.appear_scale = model.appear_scale;
  m.discriminator.resolution = dataset.resolution;
  m.discriminator.channels = dataset.channels;
  m.discriminator.widths = model.discriminator_widths;
  m.target.task = dataset.task();
  m.target.channels = dataset.channels;
  m.target.resolution = dataset.resolution;
  m.target.num_classes = dataset.num_classes;
  m.target.classifier_widths = model.classifier_widths;
  m.target.segmenter_widths = model.segmenter_widths;
  return m;
}

void RunConfig::validate() const {
  try {
    dataset.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("dataset: ") + e.what(), "dataset");
  }
  try {
    model_config().validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("model: ") + e.what(), "model");
  }
  trainer.validate();
  if (out.empty()) throw ConfigError("out must not be empty", "out");
}

RunConfig parse_run_config(std::string_view json_text) { return from_json(parse_text(json_text, "config")); }

RunConfig load_run_config(const std::filesystem::path& path) {
  return from_json(parse_text(read_file(path), path.string()));
}

std::string to_json(const RunConfig& config, int indent) { return to_json_value(config).dump(indent); }

void write_manifest(const std::filesystem::path& path, const Manifest& m) {
  char fp[19];
  std::snprintf(fp, sizeof fp, "%016llx", static_cast<unsigned long long>(m.dataset_fingerprint));
  json doc = {
      {"config", to_json_value(m.config)},
      {"seeds", {{"run", m.config.trainer.seed}, {"dataset", m.config.dataset.seed}}},
      {"version", m.version},
      {"dataset_fingerprint", fp},
      {"created", m.created},
      {"results", parse_text(m.results_json, "results")},
  };
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw InvalidArgument("cannot write manifest " + path.string());
  out << doc.dump(2) << '\n';
}

Manifest read_manifest(const std::filesystem::path& path) {
  const json doc = parse_text(read_file(path), path.string());
  if (!doc.is_object() || !doc.contains("config")) {
    throw ConfigError(path.string() + " has no config section", "config");
  }
  Manifest m;
  m.config = from_json(doc.at("config"));
  if (doc.contains("dataset_fingerprint")) {
    m.dataset_fingerprint = std::stoull(doc.at("dataset_fingerprint").get<std::string>(), nullptr, 16);
  }
  if (doc.contains("version")) m.version = doc.at("version").get<std::string>();
  if (doc.contains("created")) m.created = doc.at("created").get<std::string>();
  if (doc.contains("results")) m.results_json = doc.at("results").dump();
  return m;
}

}  // namespace advaug
