// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tcnimu Authors

#include "tcnimu/synth.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <numeric>
#include <set>

#include "tcnimu/error.hpp"
#include "tcnimu/json_fields.hpp"

namespace tcnimu {

using json_fields::json;
using json_fields::Reader;
namespace fs = std::filesystem;

namespace {

constexpr const char *kLimbNames[] = {"left_leg", "left_arm", "neck", "right_arm", "right_leg"};
constexpr const char *kAxes[] = {"ax", "ay", "az", "gx", "gy", "gz"};
constexpr std::size_t kTones = 3;

std::string limb_name(std::size_t l, std::size_t limbs) {
  return limbs == 5 ? kLimbNames[l] : "limb" + std::to_string(l);
}

std::string axis_name(std::size_t c, std::size_t per) {
  return per == 6 ? kAxes[c] : "ch" + std::to_string(c);
}

int subject_id(const SynthSpec &s, std::size_t i) { return s.first_subject_id + static_cast<int>(i); }

std::string recording_name(int subject, std::size_t r) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "S%02d_R%02zu", subject, r + 1);
  return buf;
}

std::pair<double, double> read_range(const Reader &r, const char *key, std::pair<double, double> fallback) {
  if (!r.has(key))
    return fallback;
  const Reader v = r.child(key);
  if (v.array_size() != 2 || !v.node()[0].is_number() || !v.node()[1].is_number())
    v.fail("expected [low, high]");
  const std::pair<double, double> out{v.node()[0].get<double>(), v.node()[1].get<double>()};
  if (!(out.first < out.second))
    v.fail("low must be below high");
  return out;
}

// Per-channel signature of one subject.
struct Signature {
  struct Channel {
    double dc;
    double amp[kTones], freq[kTones], phase[kTones];
  };
  std::vector<Channel> channels;
  // [activity][channel]: gain on the tone bank and an extra activity tone
  std::vector<std::vector<double>> gain, act_amp, act_freq;
};

Signature draw_signature(const SynthSpec &s, std::uint64_t stream) {
  Rng rng(mix_seed(s.seed, stream));
  std::uniform_real_distribution<double> freq(s.freq_lo, s.freq_hi), phase(0.0, 2 * std::numbers::pi),
      amp(0.3, 1.0), gain(0.6, 1.4);
  std::normal_distribution<double> dc(0.0, 1.0);
  Signature sig;
  for (std::size_t c = 0; c < s.channels(); ++c) {
    Signature::Channel ch{};
    ch.dc = dc(rng);
    for (std::size_t k = 0; k < kTones; ++k) {
      ch.amp[k] = amp(rng);
      ch.freq[k] = freq(rng);
      ch.phase[k] = phase(rng);
    }
    sig.channels.push_back(ch);
  }
  sig.gain.assign(s.activities, std::vector<double>(s.channels()));
  sig.act_amp = sig.act_freq = sig.gain;
  for (std::size_t a = 0; a < s.activities; ++a)
    for (std::size_t c = 0; c < s.channels(); ++c) {
      sig.gain[a][c] = gain(rng);
      sig.act_amp[a][c] = amp(rng);
      sig.act_freq[a][c] = freq(rng);
    }
  return sig;
}

void write_double(std::string &out, double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, r.ptr);
}

} // namespace

void SynthSpec::validate() const {
  if (subjects < 1 || limbs < 1 || channels_per_limb < 1 || recordings_per_subject < 1 ||
      activities < 1 || activity_block < 1 || frames_per_recording < 1)
    throw ConfigError("synth: counts must be >= 1");
  if (!(sampling_rate > 0.0))
    throw ConfigError("synth: sampling_rate must be > 0");
  if (!(freq_lo > 0.0 && freq_lo < freq_hi))
    throw ConfigError("synth: need 0 < freq_lo < freq_hi");
  if (!(noise_sd >= 0.0) || !(signature_scale >= 0.0) || !(attribute_strength >= 0.0))
    throw ConfigError("synth: noise_sd, signature_scale and attribute_strength must be >= 0");
  if (!metadata.empty()) {
    if (metadata.size() != subjects)
      throw ConfigError("synth: metadata lists " + std::to_string(metadata.size()) + " subjects, spec has " +
                        std::to_string(subjects));
    for (std::size_t i = 0; i < subjects; ++i)
      if (metadata[i].id != subject_id(*this, i))
        throw ConfigError("synth: metadata entry " + std::to_string(i) + " has id " +
                          std::to_string(metadata[i].id) + ", expected " + std::to_string(subject_id(*this, i)));
  }
  const int last = subject_id(*this, subjects - 1);
  for (auto [src, copy] : clones)
    if (src < first_subject_id || src > last || copy < first_subject_id || copy > last || src == copy)
      throw ConfigError("synth: clone pair (" + std::to_string(src) + ", " + std::to_string(copy) +
                        ") does not name two generated subjects");
}

json SynthSpec::to_json() const {
  json doc = {{"name", name},
              {"subjects", subjects},
              {"first_subject_id", first_subject_id},
              {"limbs", limbs},
              {"channels_per_limb", channels_per_limb},
              {"sampling_rate", sampling_rate},
              {"recordings_per_subject", recordings_per_subject},
              {"frames_per_recording", frames_per_recording},
              {"activities", activities},
              {"activity_block", activity_block},
              {"freq_range", {freq_lo, freq_hi}},
              {"signature_scale", signature_scale},
              {"noise_sd", noise_sd},
              {"seed", seed},
              {"age_range", {age_range.first, age_range.second}},
              {"weight_range", {weight_range.first, weight_range.second}},
              {"height_range", {height_range.first, height_range.second}},
              {"attribute_strength", attribute_strength}};
  if (!metadata.empty()) {
    doc["metadata"] = json::array();
    for (const auto &m : metadata)
      doc["metadata"].push_back({{"id", m.id}, {"gender", m.gender}, {"age", m.age}, {"weight", m.weight},
                                 {"height", m.height}, {"handedness", m.handedness}});
  }
  if (attribute_schema)
    doc["attribute_schema"] = attribute_schema->to_json();
  if (!clones.empty()) {
    doc["clones"] = json::array();
    for (auto [a, b] : clones)
      doc["clones"].push_back({a, b});
  }
  return doc;
}

SynthSpec SynthSpec::from_json(const json &doc, const std::string &where) {
  const Reader r(doc, where);
  r.only_keys({"name", "subjects", "first_subject_id", "limbs", "channels_per_limb", "sampling_rate",
               "recordings_per_subject", "frames_per_recording", "activities", "activity_block",
               "freq_range", "signature_scale", "noise_sd", "seed", "metadata", "age_range",
               "weight_range", "height_range", "attribute_schema", "attribute_strength", "clones"});
  SynthSpec s;
  auto count = [&](const char *key, std::size_t fallback) {
    const long long v = r.integer(key, static_cast<long long>(fallback));
    if (v < 1)
      r.fail_at(key, "must be >= 1");
    return static_cast<std::size_t>(v);
  };
  s.name = r.string("name", s.name);
  s.subjects = count("subjects", s.subjects);
  s.first_subject_id = static_cast<int>(r.integer("first_subject_id", s.first_subject_id));
  s.limbs = count("limbs", s.limbs);
  s.channels_per_limb = count("channels_per_limb", s.channels_per_limb);
  s.sampling_rate = r.number("sampling_rate", s.sampling_rate);
  s.recordings_per_subject = count("recordings_per_subject", s.recordings_per_subject);
  s.frames_per_recording = count("frames_per_recording", s.frames_per_recording);
  s.activities = count("activities", s.activities);
  s.activity_block = count("activity_block", s.activity_block);
  std::tie(s.freq_lo, s.freq_hi) = read_range(r, "freq_range", {s.freq_lo, s.freq_hi});
  s.signature_scale = r.number("signature_scale", s.signature_scale);
  s.noise_sd = r.number("noise_sd", s.noise_sd);
  const long long seed = r.integer("seed", static_cast<long long>(s.seed));
  if (seed < 0)
    r.fail_at("seed", "must be >= 0");
  s.seed = static_cast<std::uint64_t>(seed);
  s.age_range = read_range(r, "age_range", s.age_range);
  s.weight_range = read_range(r, "weight_range", s.weight_range);
  s.height_range = read_range(r, "height_range", s.height_range);
  s.attribute_strength = r.number("attribute_strength", 0.0);
  if (r.has("metadata")) {
    const Reader m = r.child("metadata");
    for (std::size_t i = 0; i < m.array_size(); ++i) {
      const Reader e = m.at(i);
      s.metadata.push_back({static_cast<int>(e.integer("id")), e.string("gender"), e.number("age"),
                            e.number("weight"), e.number("height"), e.string("handedness", "R")});
    }
  }
  if (r.has("attribute_schema")) {
    const Reader a = r.child("attribute_schema");
    s.attribute_schema = a.node().is_string()
                             ? AttributeSchema::preset(a.node().get<std::string>())
                             : AttributeSchema::from_json(a.node(), where + " /attribute_schema");
  }
  if (r.has("clones")) {
    const Reader c = r.child("clones");
    for (std::size_t i = 0; i < c.array_size(); ++i) {
      const json &p = c.node()[i];
      if (!p.is_array() || p.size() != 2 || !p[0].is_number_integer() || !p[1].is_number_integer())
        c.at(i).fail("expected [source_id, copy_id]");
      s.clones.emplace_back(p[0].get<int>(), p[1].get<int>());
    }
  }
  try {
    s.validate();
  } catch (const ConfigError &e) {
    r.fail(e.what());
  }
  return s;
}

std::vector<SubjectMeta> synth_metadata(const SynthSpec &s) {
  if (!s.metadata.empty())
    return s.metadata;
  Rng rng(mix_seed(s.seed, 0x6d657461));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  // stratified draws: subject i lands in the i-th slice of each range, slices shuffled per biometric
  auto strata = [&](std::pair<double, double> range) {
    std::vector<double> v;
    for (std::size_t i = 0; i < s.subjects; ++i)
      v.push_back(std::round(range.first + (range.second - range.first) *
                                                (static_cast<double>(i) + u(rng)) / static_cast<double>(s.subjects)));
    std::shuffle(v.begin(), v.end(), rng);
    return v;
  };
  const auto age = strata(s.age_range), weight = strata(s.weight_range), height = strata(s.height_range);
  std::vector<std::string> gender;
  for (std::size_t i = 0; i < s.subjects; ++i)
    gender.push_back(i % 2 ? "F" : "M");
  std::shuffle(gender.begin(), gender.end(), rng);
  std::vector<SubjectMeta> out;
  for (std::size_t i = 0; i < s.subjects; ++i)
    out.push_back({subject_id(s, i), gender[i], age[i], weight[i], height[i],
                   (s.subjects > 1 && i == s.subjects - 1) ? "L" : "R"});
  return out;
}

DatasetManifest write_synthetic(const SynthSpec &s, const fs::path &dir) {
  s.validate();
  fs::create_directories(dir);
  DatasetManifest m;
  m.name = s.name;
  m.sampling_rate = s.sampling_rate;
  for (std::size_t l = 0; l < s.limbs; ++l) {
    Limb limb{limb_name(l, s.limbs), {}};
    for (std::size_t c = 0; c < s.channels_per_limb; ++c) {
      limb.channels.push_back(m.channels.size());
      m.channels.push_back(limb.name + "_" + axis_name(c, s.channels_per_limb));
    }
    m.grouping.limbs.push_back(std::move(limb));
  }
  std::vector<std::string> activity_names;
  for (std::size_t a = 0; a < s.activities; ++a) {
    activity_names.push_back("activity" + std::to_string(a));
    m.activities[activity_names.back()] = static_cast<int>(a);
  }
  m.subjects = synth_metadata(s);

  std::map<int, int> signature_of;
  for (std::size_t i = 0; i < s.subjects; ++i)
    signature_of[subject_id(s, i)] = subject_id(s, i);
  for (auto [src, copy] : s.clones)
    signature_of[copy] = signature_of[src];

  const double two_pi = 2 * std::numbers::pi;
  for (std::size_t i = 0; i < s.subjects; ++i) {
    const int id = subject_id(s, i);
    const Signature sig = draw_signature(s, 0x5000 + static_cast<std::uint64_t>(signature_of[id]));
    std::vector<int> bits;
    if (s.attribute_schema && s.attribute_strength > 0.0)
      bits = encode_subject(m.subjects[i], *s.attribute_schema);

    for (std::size_t r = 0; r < s.recordings_per_subject; ++r) {
      Rng rng(mix_seed(s.seed, (static_cast<std::uint64_t>(id) << 16) + r));
      std::normal_distribution<double> noise(0.0, s.noise_sd);
      std::uniform_real_distribution<double> offset(0.0, 100.0);
      const double t0 = offset(rng); // recordings start at different points of the cycles
      std::vector<std::size_t> order(s.activities);
      std::iota(order.begin(), order.end(), 0);
      std::shuffle(order.begin(), order.end(), rng);

      const std::string rid = recording_name(id, r);
      std::string csv = "frame";
      for (const auto &c : m.channels)
        csv += "," + c;
      csv += ",activity\n";
      for (std::size_t f = 0; f < s.frames_per_recording; ++f) {
        const std::size_t act = order[(f / s.activity_block) % s.activities];
        const double t = t0 + static_cast<double>(f) / s.sampling_rate;
        csv += std::to_string(f);
        for (std::size_t c = 0; c < s.channels(); ++c) {
          const auto &ch = sig.channels[c];
          double v = ch.dc;
          for (std::size_t k = 0; k < kTones; ++k)
            v += sig.gain[act][c] * ch.amp[k] * std::sin(two_pi * ch.freq[k] * t + ch.phase[k]);
          v += sig.act_amp[act][c] * std::sin(two_pi * sig.act_freq[act][c] * t);
          v *= s.signature_scale;
          for (std::size_t b = 0; b < bits.size(); ++b) {
            const std::size_t limb = b % s.limbs;
            if (c / s.channels_per_limb != limb)
              continue;
            const double sign = bits[b] ? 1.0 : -1.0;
            if (c % s.channels_per_limb == (b / s.limbs) % s.channels_per_limb)
              v += sign * s.attribute_strength;
            if (bits[b])
              v += s.attribute_strength * std::sin(two_pi * (0.75 + 0.5 * static_cast<double>(b)) * t);
          }
          v += noise(rng);
          csv += ',';
          write_double(csv, v);
        }
        csv += "," + activity_names[act] + "\n";
      }
      const fs::path path = fs::absolute(dir) / (rid + ".csv");
      std::ofstream out(path, std::ios::binary | std::ios::trunc);
      if (!out)
        throw IoError("cannot write " + path.string());
      out << csv;
      m.recordings.push_back({path, id, rid});
    }
  }
  save_manifest(m, dir / "manifest.json");
  return m;
}

} // namespace tcnimu
