// Copyright 2026 The xcnet Authors. All Rights Reserved.
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

#include "xcnet/config.hpp"

#include <algorithm>
#include <array>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace xcnet {

namespace {

[[noreturn]] void config_error(const std::string& msg) { throw Error(ErrorCode::kConfigError, msg); }

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s, char sep = ',') {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    config_error(key + ": expected a number, got '" + v + "'");
  }
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    if (!v.empty() && v[0] == '-') throw std::invalid_argument(v);
    const unsigned long long u = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return u;
  } catch (const std::exception&) {
    config_error(key + ": expected a non-negative integer, got '" + v + "'");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  config_error(key + ": expected true or false, got '" + v + "'");
}

template <typename E>
E to_enum(const std::string& key, const std::string& v, std::initializer_list<E> options) {
  std::string allowed;
  for (E e : options) {
    if (to_string(e) == v) return e;
    allowed += (allowed.empty() ? "" : "|") + to_string(e);
  }
  config_error(key + ": '" + v + "' is not one of " + allowed);
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::string join_doubles(const std::array<double, 6>& a) {
  std::string out;
  for (std::size_t i = 0; i < a.size(); ++i) out += (i ? "," : "") + fmt(a[i]);
  return out;
}

std::array<double, 6> six_values(const std::string& key, const std::string& v) {
  const auto parts = split_list(v);
  if (parts.size() != 6) config_error(key + ": expected 6 comma-separated values (severity 0..5)");
  std::array<double, 6> out{};
  for (std::size_t i = 0; i < 6; ++i) out[i] = to_double(key, parts[i]);
  return out;
}

using Setter = std::function<void(RunConfig&, const std::string& key, const std::string& value)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> m;
    // [model]
    m["model.kind"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.model.kind = to_enum(k, v, {BlockKind::kXCNorm, BlockKind::kRXCNorm, BlockKind::kBaseline});
    };
    m["model.welsch_form"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.model.welsch_form = to_enum(k, v, {WelschForm::kRho, WelschForm::kSigned, WelschForm::kInfluence});
    };
    m["model.layers"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      const auto parts = split_list(v);
      if (parts.empty()) config_error(k + ": needs at least one channel count");
      const LayerSpec proto = c.model.layers.empty() ? LayerSpec{} : c.model.layers.front();
      c.model.layers.clear();
      for (const auto& p : parts) {
        LayerSpec l = proto;
        l.out_channels = to_uint(k, p);
        c.model.layers.push_back(l);
      }
    };
    auto per_layer = [](std::size_t LayerSpec::*field) {
      return [field](RunConfig& c, const std::string& k, const std::string& v) {
        const std::size_t value = to_uint(k, v);
        for (auto& l : c.model.layers) l.*field = value;
      };
    };
    m["model.kernel"] = per_layer(&LayerSpec::kernel);
    m["model.stride"] = per_layer(&LayerSpec::stride);
    m["model.padding"] = per_layer(&LayerSpec::padding);
    m["model.pool"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.model.pool = to_enum(k, v, {PoolKind::kMax, PoolKind::kAvg});
    };
    m["model.pool_window"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.model.pool_window = to_uint(k, v);
    };
    m["model.head"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.model.head = to_enum(k, v, {HeadKind::kNormalized, HeadKind::kLinear});
    };
    m["model.baseline_norm"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.model.baseline_norm = to_enum(k, v, {NormKind::kBatch, NormKind::kInstance});
    };
    m["model.nbam"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.model.nbam = to_bool(k, v); };
    m["model.n_classes"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.model.n_classes = to_uint(k, v);
    };
    m["model.in_height"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.model.in_height = to_uint(k, v);
    };
    m["model.in_width"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.model.in_width = to_uint(k, v);
    };
    m["model.in_channels"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.model.in_channels = to_uint(k, v);
    };
    // [optim]
    m["optim.lr"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.optim.lr = to_double(k, v); };
    m["optim.momentum"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.optim.momentum = to_double(k, v);
    };
    m["optim.weight_decay"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.optim.weight_decay = to_double(k, v);
    };
    m["optim.batch_size"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.optim.batch_size = to_uint(k, v);
    };
    m["optim.epochs"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.optim.epochs = to_uint(k, v); };
    m["optim.learn_scale"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.optim.learn_scale = to_bool(k, v);
    };
    m["optim.lr_step"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.optim.lr_step = to_uint(k, v); };
    m["optim.lr_decay"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.optim.lr_decay = to_double(k, v);
    };
    m["optim.rc_prob"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.optim.rc_prob = to_double(k, v);
    };
    m["optim.rc_mix"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.optim.rc_mix = to_double(k, v); };
    m["optim.seed"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.seed = to_uint(k, v); };
    // [data]
    m["data.source"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      if (v == "synth") c.data.source = DataSource::kSynth;
      else if (v == "idx") c.data.source = DataSource::kIdx;
      else config_error(k + ": '" + v + "' is not one of synth|idx");
    };
    m["data.synth_n"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.data.synth_n = to_uint(k, v); };
    m["data.synth_seed"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.data.synth_seed = to_uint(k, v);
    };
    m["data.synth_texture"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.data.synth_texture = to_double(k, v);
      if (c.data.synth_texture < 0) config_error(k + ": must be >= 0");
    };
    m["data.train_images"] = [](RunConfig& c, const std::string&, const std::string& v) { c.data.train_images = v; };
    m["data.train_labels"] = [](RunConfig& c, const std::string&, const std::string& v) { c.data.train_labels = v; };
    m["data.test_images"] = [](RunConfig& c, const std::string&, const std::string& v) { c.data.test_images = v; };
    m["data.test_labels"] = [](RunConfig& c, const std::string&, const std::string& v) { c.data.test_labels = v; };
    m["data.target"] = [](RunConfig& c, const std::string&, const std::string& v) { c.data.target = v; };
    m["data.limit"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.data.limit = to_uint(k, v); };
    m["data.side"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.data.side = to_uint(k, v); };
    // [corruption]
    m["corruption.families"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      try {
        c.corruption.families = parse_family_list(v);
      } catch (const Error& e) {
        config_error(k + ": " + e.what());
      }
    };
    m["corruption.seed"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.corruption.seed = to_uint(k, v);
    };
    m["corruption.gaussian_noise"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.corruption.table.noise_sigma = six_values(k, v);
    };
    m["corruption.salt_pepper"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.corruption.table.flip_prob = six_values(k, v);
    };
    m["corruption.gaussian_blur"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.corruption.table.blur_sigma = six_values(k, v);
    };
    m["corruption.pixelate"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.corruption.table.pixelate_factor = six_values(k, v);
    };
    m["corruption.brightness_contrast"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      const auto parts = split_list(v);
      if (parts.size() != 6) config_error(k + ": expected 6 comma-separated a:b pairs (severity 0..5)");
      for (std::size_t i = 0; i < 6; ++i) {
        const auto ab = split_list(parts[i], ':');
        if (ab.size() != 2) config_error(k + ": '" + parts[i] + "' is not a:b");
        c.corruption.table.contrast_shift[i] = {to_double(k, ab[0]), to_double(k, ab[1])};
      }
    };
    // [output]
    m["output.dir"] = [](RunConfig& c, const std::string&, const std::string& v) { c.output_dir = v; };
    return m;
  }();
  return table;
}

void check_table(const RunConfig& c) {
  const auto& t = c.corruption.table;
  if (t.noise_sigma[0] != 0 || t.flip_prob[0] != 0 || t.blur_sigma[0] != 0 || t.pixelate_factor[0] != 1 ||
      t.contrast_shift[0] != std::make_pair(1.0, 0.0)) {
    config_error("corruption: severity 0 must be the identity setting");
  }
  for (int s = 1; s <= kMaxSeverity; ++s) {
    const auto i = static_cast<std::size_t>(s);
    if (t.noise_sigma[i] < 0 || t.blur_sigma[i] <= 0 || t.flip_prob[i] < 0 || t.flip_prob[i] > 1 ||
        t.pixelate_factor[i] < 1) {
      config_error("corruption: severity " + std::to_string(s) + " has an out-of-range parameter");
    }
  }
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  RunConfig cfg;
  static const std::set<std::string> sections{"model", "optim", "data", "corruption", "output"};
  std::istringstream in(text);
  std::string line, section;
  std::set<std::string> seen;
  std::size_t line_no = 0;
  // layers must be applied before kernel/stride/padding, which fan out to
  // every layer; collect first, then apply in a fixed order.
  std::vector<std::pair<std::string, std::string>> entries;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find_first_of("#;");
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(line_no);
    if (line.front() == '[') {
      if (line.back() != ']') config_error(where + ": unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (!sections.count(section)) config_error(where + ": unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) config_error(where + ": expected key = value");
    if (section.empty()) config_error(where + ": key outside any section");
    const std::string key = section + "." + trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!setters().count(key)) config_error("unknown key '" + key + "' (" + where + ")");
    if (!seen.insert(key).second) config_error("duplicate key '" + key + "' (" + where + ")");
    entries.emplace_back(key, value);
  }
  std::stable_partition(entries.begin(), entries.end(), [](const auto& e) { return e.first == "model.layers"; });
  for (const auto& [key, value] : entries) setters().at(key)(cfg, key, value);
  try {
    cfg.model.validate();
  } catch (const Error& e) {
    config_error(std::string("model: ") + e.what());
  }
  if (cfg.optim.batch_size == 0) config_error("optim.batch_size must be >= 1");
  if (cfg.optim.rc_mix < 0 || cfg.optim.rc_mix > 1) config_error("optim.rc_mix must lie in [0, 1]");
  if (cfg.data.source == DataSource::kIdx && (cfg.data.train_images.empty() || cfg.data.train_labels.empty())) {
    config_error("data: source = idx needs train_images and train_labels");
  }
  if (cfg.data.source == DataSource::kSynth && cfg.data.synth_n == 0) config_error("data.synth_n must be >= 1");
  if (cfg.data.source == DataSource::kSynth && cfg.data.side < 12) config_error("data.side must be >= 12 for synth");
  if (cfg.model.in_channels != 1 || cfg.model.in_height != cfg.data.side || cfg.model.in_width != cfg.data.side) {
    config_error("data.side = " + std::to_string(cfg.data.side) + " does not match the model input " +
                 std::to_string(cfg.model.in_height) + "x" + std::to_string(cfg.model.in_width) + "x" +
                 std::to_string(cfg.model.in_channels));
  }
  check_table(cfg);
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) config_error("cannot read config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string RunConfig::materialize() const {
  std::ostringstream os;
  os << "[model]\n"
     << "kind = " << to_string(model.kind) << "\n"
     << "welsch_form = " << to_string(model.welsch_form) << "\n"
     << "layers = ";
  for (std::size_t i = 0; i < model.layers.size(); ++i) os << (i ? "," : "") << model.layers[i].out_channels;
  os << "\n";
  const LayerSpec& l = model.layers.front();
  os << "kernel = " << l.kernel << "\nstride = " << l.stride << "\npadding = " << l.padding << "\n"
     << "pool = " << to_string(model.pool) << "\npool_window = " << model.pool_window << "\n"
     << "head = " << to_string(model.head) << "\nbaseline_norm = " << to_string(model.baseline_norm) << "\n"
     << "nbam = " << (model.nbam ? "true" : "false") << "\nn_classes = " << model.n_classes << "\n"
     << "in_height = " << model.in_height << "\nin_width = " << model.in_width << "\nin_channels = "
     << model.in_channels << "\n\n";
  os << "[optim]\n"
     << "lr = " << fmt(optim.lr) << "\nmomentum = " << fmt(optim.momentum) << "\nweight_decay = "
     << fmt(optim.weight_decay) << "\nbatch_size = " << optim.batch_size << "\nepochs = " << optim.epochs
     << "\nlearn_scale = " << (optim.learn_scale ? "true" : "false") << "\nlr_step = " << optim.lr_step
     << "\nlr_decay = " << fmt(optim.lr_decay) << "\nrc_prob = " << fmt(optim.rc_prob) << "\nrc_mix = "
     << fmt(optim.rc_mix) << "\nseed = " << seed << "\n\n";
  os << "[data]\n"
     << "source = " << (data.source == DataSource::kSynth ? "synth" : "idx") << "\nsynth_n = " << data.synth_n
     << "\nsynth_seed = " << data.synth_seed << "\nsynth_texture = " << fmt(data.synth_texture) << "\ntrain_images = " << data.train_images
     << "\ntrain_labels = " << data.train_labels << "\ntest_images = " << data.test_images
     << "\ntest_labels = " << data.test_labels << "\ntarget = " << data.target << "\nlimit = " << data.limit
     << "\nside = " << data.side << "\n\n";
  os << "[corruption]\nfamilies = ";
  for (std::size_t i = 0; i < corruption.families.size(); ++i) os << (i ? "," : "") << to_string(corruption.families[i]);
  const auto& t = corruption.table;
  os << "\nseed = " << corruption.seed << "\ngaussian_noise = " << join_doubles(t.noise_sigma)
     << "\nsalt_pepper = " << join_doubles(t.flip_prob) << "\ngaussian_blur = " << join_doubles(t.blur_sigma)
     << "\nbrightness_contrast = ";
  for (std::size_t i = 0; i < 6; ++i) os << (i ? "," : "") << fmt(t.contrast_shift[i].first) << ":" << fmt(t.contrast_shift[i].second);
  os << "\npixelate = " << join_doubles(t.pixelate_factor) << "\n\n";
  os << "[output]\ndir = " << output_dir << "\n";
  return os.str();
}

std::uint64_t RunConfig::fingerprint() const { return fnv1a64(materialize()); }

std::filesystem::path default_data_root() {
  if (const char* env = std::getenv("XCNET_DATA_DIR"); env && *env) return env;
  return std::filesystem::current_path();
}

std::filesystem::path resolve_data_path(const std::string& path, const std::filesystem::path& root) {
  const std::filesystem::path p(path);
  return p.is_absolute() ? p : root / p;
}

Split parse_split(const std::string& name) {
  if (name == "train") return Split::kTrain;
  if (name == "test") return Split::kTest;
  if (name == "target") return Split::kTarget;
  config_error("unknown split '" + name + "' (train|test|target)");
}

Dataset load_split(const DataConfig& data, Split split, const std::filesystem::path& root) {
  if (data.source == DataSource::kSynth) {
    if (split == Split::kTarget) config_error("synthetic data has no target split");
    Dataset ds = synth_corpus(split == Split::kTrain ? data.synth_seed : data.synth_seed + 1, data.synth_n,
                              data.side, data.synth_texture);
    ds.name = split == Split::kTrain ? "synth_train" : "synth_test";
    return ds;
  }
  switch (split) {
    case Split::kTrain: {
      Dataset ds = load_idx(resolve_data_path(data.train_images, root), resolve_data_path(data.train_labels, root),
                            data.side, data.limit);
      ds.name = "train";
      return ds;
    }
    case Split::kTest: {
      if (data.test_images.empty()) config_error("data: no test_images configured");
      Dataset ds = load_idx(resolve_data_path(data.test_images, root), resolve_data_path(data.test_labels, root),
                            data.side, 0);
      ds.name = "test";
      return ds;
    }
    case Split::kTarget: {
      if (data.target.empty()) config_error("data: no target configured");
      Dataset ds = load_svmtext(resolve_data_path(data.target, root), 16, data.side);
      ds.name = "target";
      return ds;
    }
  }
  config_error("unreachable split");
}

std::vector<CorruptionFamily> parse_family_list(const std::string& text) {
  if (trim(text) == "all") return all_families();
  std::vector<CorruptionFamily> out;
  for (const auto& name : split_list(text)) out.push_back(parse_family(name));
  if (out.empty()) throw Error(ErrorCode::kUnknownFamily, "empty family list");
  return out;
}

}  // namespace xcnet
