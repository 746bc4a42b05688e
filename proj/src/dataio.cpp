// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tcnimu Authors

#include "tcnimu/dataio.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "tcnimu/json_fields.hpp"
#include "tcnimu/log.hpp"

namespace tcnimu {

namespace fs = std::filesystem;
using json_fields::json;
using json_fields::Reader;

// ---- limb grouping ----------------------------------------------------------

void LimbGrouping::validate(std::size_t channels) const {
  if (limbs.empty())
    throw ConfigError("limb grouping needs at least one limb");
  std::set<std::size_t> seen;
  std::set<std::string> names;
  for (const Limb &l : limbs) {
    if (!names.insert(l.name).second)
      throw ConfigError("limb '" + l.name + "' listed twice");
    if (l.channels.empty())
      throw ConfigError("limb '" + l.name + "' has no channels");
    for (std::size_t c : l.channels) {
      if (c >= channels)
        throw ConfigError("limb '" + l.name + "' references channel " + std::to_string(c) +
                          " but the data has " + std::to_string(channels));
      if (!seen.insert(c).second)
        throw ConfigError("channel " + std::to_string(c) + " belongs to more than one limb");
    }
  }
}

LimbGrouping LimbGrouping::single(std::size_t channels, std::string name) {
  Limb l{std::move(name), {}};
  for (std::size_t c = 0; c < channels; ++c)
    l.channels.push_back(c);
  return LimbGrouping{{l}};
}

LimbGrouping LimbGrouping::uniform(std::size_t limbs, std::size_t per_limb) {
  LimbGrouping g;
  for (std::size_t i = 0; i < limbs; ++i) {
    Limb l{"limb" + std::to_string(i), {}};
    for (std::size_t c = 0; c < per_limb; ++c)
      l.channels.push_back(i * per_limb + c);
    g.limbs.push_back(std::move(l));
  }
  return g;
}

// ---- manifest ---------------------------------------------------------------

const SubjectMeta &DatasetManifest::subject(int id) const {
  for (const SubjectMeta &s : subjects)
    if (s.id == id)
      return s;
  throw DataError("subject " + std::to_string(id) + " has no metadata in the manifest");
}

std::vector<std::string> DatasetManifest::activity_names() const {
  int top = -1;
  for (const auto &[_, idx] : activities)
    top = std::max(top, idx);
  std::vector<std::string> names(static_cast<std::size_t>(top + 1));
  for (const auto &[name, idx] : activities)
    names[static_cast<std::size_t>(idx)] = name;
  return names;
}

DatasetManifest load_manifest(const fs::path &path) {
  const json doc = json_fields::read_file(path);
  const Reader root(doc, path.string());
  root.only_keys({"name", "sampling_rate", "channels", "limbs", "activities", "subjects",
                  "recordings", "drop_invalid_frames"});
  DatasetManifest m;
  m.name = root.string("name");
  m.sampling_rate = root.number("sampling_rate");
  if (!(m.sampling_rate > 0.0))
    root.fail_at("sampling_rate", "must be > 0");
  m.drop_invalid_frames = root.boolean("drop_invalid_frames", false);

  const Reader chans = root.child("channels");
  std::map<std::string, std::size_t> channel_index;
  for (std::size_t i = 0; i < chans.array_size(); ++i) {
    if (!chans.node()[i].is_string())
      chans.at(i).fail("expected a channel name");
    m.channels.push_back(chans.node()[i].get<std::string>());
    if (!channel_index.emplace(m.channels.back(), i).second)
      chans.at(i).fail("duplicate channel name '" + m.channels.back() + "'");
  }
  if (m.channels.empty())
    chans.fail("at least one channel is required");

  const Reader limbs = root.child("limbs");
  for (std::size_t i = 0; i < limbs.array_size(); ++i) {
    const Reader l = limbs.at(i);
    Limb limb{l.string("name"), {}};
    const Reader lc = l.child("channels");
    for (std::size_t j = 0; j < lc.array_size(); ++j) {
      const json &c = lc.node()[j];
      if (!c.is_string() || !channel_index.count(c.get<std::string>()))
        lc.at(j).fail("not a channel name declared in /channels");
      limb.channels.push_back(channel_index[c.get<std::string>()]);
    }
    m.grouping.limbs.push_back(std::move(limb));
  }
  try {
    m.grouping.validate(m.channels.size());
  } catch (const ConfigError &e) {
    limbs.fail(e.what());
  }

  if (root.has("activities")) {
    const Reader acts = root.child("activities");
    if (!acts.node().is_object())
      acts.fail("expected an object mapping activity name to index");
    std::set<int> used;
    for (const auto &[name, idx] : acts.node().items()) {
      if (!idx.is_number_integer() || idx.get<int>() < 0)
        acts.fail_at(name, "expected a non-negative integer index");
      if (!used.insert(idx.get<int>()).second)
        acts.fail_at(name, "index used twice");
      m.activities[name] = idx.get<int>();
    }
  }

  if (root.has("subjects")) {
    const Reader subs = root.child("subjects");
    for (std::size_t i = 0; i < subs.array_size(); ++i) {
      const Reader s = subs.at(i);
      SubjectMeta meta;
      meta.id = static_cast<int>(s.integer("id"));
      meta.gender = s.string("gender", "");
      meta.age = s.number("age", 0.0);
      meta.weight = s.number("weight", 0.0);
      meta.height = s.number("height", 0.0);
      meta.handedness = s.string("handedness", "");
      m.subjects.push_back(meta);
    }
  }

  const Reader recs = root.child("recordings");
  std::set<std::string> rec_ids;
  for (std::size_t i = 0; i < recs.array_size(); ++i) {
    const Reader r = recs.at(i);
    RecordingEntry e;
    const fs::path p = r.string("path");
    e.path = p.is_absolute() ? p : path.parent_path() / p;
    e.subject_id = static_cast<int>(r.integer("subject_id"));
    e.recording_id = r.string("recording_id", p.stem().string());
    if (!rec_ids.insert(e.recording_id).second)
      r.fail_at("recording_id", "duplicate recording id '" + e.recording_id + "'");
    m.recordings.push_back(std::move(e));
  }
  return m;
}

void save_manifest(const DatasetManifest &m, const fs::path &path) {
  json doc;
  doc["name"] = m.name;
  doc["sampling_rate"] = m.sampling_rate;
  doc["channels"] = m.channels;
  doc["limbs"] = json::array();
  for (const Limb &l : m.grouping.limbs) {
    json names = json::array();
    for (std::size_t c : l.channels)
      names.push_back(m.channels.at(c));
    doc["limbs"].push_back({{"name", l.name}, {"channels", names}});
  }
  doc["activities"] = json::object();
  for (const auto &[name, idx] : m.activities)
    doc["activities"][name] = idx;
  doc["subjects"] = json::array();
  for (const SubjectMeta &s : m.subjects)
    doc["subjects"].push_back({{"id", s.id},
                               {"gender", s.gender},
                               {"age", s.age},
                               {"weight", s.weight},
                               {"height", s.height},
                               {"handedness", s.handedness}});
  doc["recordings"] = json::array();
  for (const RecordingEntry &r : m.recordings) {
    const fs::path rel = r.path.is_absolute() ? fs::relative(r.path, path.parent_path()) : r.path;
    doc["recordings"].push_back(
        {{"path", rel.generic_string()}, {"subject_id", r.subject_id}, {"recording_id", r.recording_id}});
  }
  doc["drop_invalid_frames"] = m.drop_invalid_frames;
  json_fields::write_file(path, doc);
}

// ---- CSV --------------------------------------------------------------------

namespace {

std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    cells.push_back(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start));
    if (comma == std::string_view::npos)
      break;
    start = comma + 1;
  }
  return cells;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
    s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

bool parse_double(std::string_view s, double &out) {
  s = trim(s);
  if (s.empty())
    return false;
  if (s.front() == '+')
    s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

} // namespace

Recording load_recording(const fs::path &path, const DatasetManifest &manifest,
                         const RecordingEntry &entry) {
  std::ifstream in(path);
  if (!in)
    throw IoError("recording file not found: " + path.string());
  const std::string where = path.filename().string();

  std::string line;
  if (!std::getline(in, line))
    throw DataError(where + ": empty file");
  const auto header = split_csv_line(line);
  const std::size_t channels = manifest.channels.size();
  const bool has_activity = header.size() == channels + 2;
  if (header.size() != channels + 1 && !has_activity)
    throw DataError(where + ": header has " + std::to_string(header.size()) +
                    " columns, manifest expects frame + " + std::to_string(channels) +
                    " channels [+ activity]");
  if (trim(header[0]) != "frame")
    throw DataError(where + ": first column must be 'frame'");
  for (std::size_t c = 0; c < channels; ++c)
    if (trim(header[c + 1]) != manifest.channels[c])
      throw DataError(where + ": column " + std::to_string(c + 2) + " is '" +
                      std::string(trim(header[c + 1])) + "', manifest expects '" +
                      manifest.channels[c] + "'");
  if (has_activity && trim(header.back()) != "activity")
    throw DataError(where + ": last column must be 'activity'");

  Recording rec;
  rec.recording_id = entry.recording_id;
  rec.subject_id = entry.subject_id;
  rec.sampling_rate = manifest.sampling_rate;
  std::vector<double> values;
  std::vector<double> row(channels);
  std::size_t line_no = 1;
  std::size_t kept = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty())
      continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw DataError(where + ": row " + std::to_string(line_no) + " has " +
                      std::to_string(cells.size()) + " cells, header has " +
                      std::to_string(header.size()));
    bool valid = true;
    for (std::size_t c = 0; c < channels && valid; ++c) {
      if (!parse_double(cells[c + 1], row[c])) {
        if (!manifest.drop_invalid_frames)
          throw DataError(where + ": row " + std::to_string(line_no) + ", column '" +
                          manifest.channels[c] + "': not a finite number ('" +
                          std::string(trim(cells[c + 1])) + "')");
        valid = false;
      }
    }
    int label = -1;
    if (has_activity) {
      const std::string name(trim(cells.back()));
      if (!name.empty() && name != "-1") {
        const auto it = manifest.activities.find(name);
        if (it == manifest.activities.end())
          throw DataError(where + ": row " + std::to_string(line_no) + ": unknown activity '" +
                          name + "'");
        label = it->second;
      }
    }
    if (!valid) {
      ++rec.dropped_frames;
      continue;
    }
    values.insert(values.end(), row.begin(), row.end());
    if (has_activity)
      rec.activity.push_back(label);
    ++kept;
  }
  if (rec.dropped_frames > 0)
    log_line(where + ": dropped " + std::to_string(rec.dropped_frames) +
             " frames with invalid cells");
  rec.frames = Tensor({kept, channels}, std::move(values));
  return rec;
}

std::vector<Recording> load_recordings(const DatasetManifest &manifest) {
  std::vector<Recording> out;
  for (const RecordingEntry &e : manifest.recordings)
    out.push_back(load_recording(e.path, manifest, e));
  return out;
}

// ---- windows ----------------------------------------------------------------

std::vector<Window> segment(const Recording &rec, std::size_t win_len, std::size_t stride) {
  if (win_len < 1 || stride < 1)
    throw ConfigError("segment: window length and stride must be >= 1");
  const std::size_t time = rec.time(), ch = rec.channels();
  std::vector<Window> out;
  out.reserve(window_count(time, win_len, stride));
  for (std::size_t start = 0; start + win_len <= time; start += stride) {
    Window w;
    w.subject_id = rec.subject_id;
    w.recording_id = rec.recording_id;
    w.start_frame = start;
    w.data = Tensor({win_len, ch});
    std::copy_n(rec.frames.data() + start * ch, win_len * ch, w.data.data());
    if (rec.has_activity()) {
      std::map<int, std::size_t> counts;
      for (std::size_t t = start; t < start + win_len; ++t)
        ++counts[rec.activity[t]];
      std::size_t best = 0;
      int label = -1;
      bool tie = false;
      for (const auto &[lab, n] : counts) {
        if (n > best) {
          best = n;
          label = lab;
          tie = false;
        } else if (n == best) {
          tie = true;
        }
      }
      w.activity = tie ? rec.activity[start + win_len / 2] : label;
    }
    out.push_back(std::move(w));
  }
  return out;
}

// ---- normalization ----------------------------------------------------------

ChannelStats fit_channel_stats(const std::vector<Window> &windows) {
  if (windows.empty())
    throw DataError("fit_channel_stats: no training windows");
  const std::size_t ch = windows.front().data.dim(1);
  std::vector<double> sum(ch, 0.0);
  std::size_t count = 0;
  for (const Window &w : windows) {
    if (w.data.dim(1) != ch)
      throw DataError("fit_channel_stats: windows disagree on channel count");
    for (std::size_t t = 0; t < w.data.dim(0); ++t)
      for (std::size_t c = 0; c < ch; ++c)
        sum[c] += w.data[t * ch + c];
    count += w.data.dim(0);
  }
  ChannelStats s;
  s.mean.resize(ch);
  for (std::size_t c = 0; c < ch; ++c)
    s.mean[c] = sum[c] / static_cast<double>(count);
  // second pass on centred values, plus the usual correction term
  std::vector<double> sq(ch, 0.0), corr(ch, 0.0);
  for (const Window &w : windows)
    for (std::size_t t = 0; t < w.data.dim(0); ++t)
      for (std::size_t c = 0; c < ch; ++c) {
        const double d = w.data[t * ch + c] - s.mean[c];
        sq[c] += d * d;
        corr[c] += d;
      }
  s.sd.resize(ch);
  s.degenerate.resize(ch);
  for (std::size_t c = 0; c < ch; ++c) {
    const double n = static_cast<double>(count);
    s.mean[c] += corr[c] / n;
    const double var = std::max(0.0, (sq[c] - corr[c] * corr[c] / n) / n);
    const double sd = std::sqrt(var);
    s.degenerate[c] = sd < kDegenerateSd;
    s.sd[c] = s.degenerate[c] ? 1.0 : sd;
  }
  return s;
}

std::vector<Window> normalize(std::vector<Window> windows, const ChannelStats &stats, bool bypass) {
  if (bypass)
    return windows;
  const std::size_t ch = stats.channels();
  for (Window &w : windows) {
    if (w.data.dim(1) != ch)
      throw DataError("normalize: window has " + std::to_string(w.data.dim(1)) +
                      " channels, stats have " + std::to_string(ch));
    for (std::size_t t = 0; t < w.data.dim(0); ++t)
      for (std::size_t c = 0; c < ch; ++c) {
        double &v = w.data[t * ch + c];
        v = (v - stats.mean[c]) / stats.sd[c];
      }
  }
  return windows;
}

Tensor add_gaussian_noise(const Tensor &data, double sigma, Rng &rng) {
  if (!(sigma >= 0.0))
    throw ConfigError("noise sigma must be >= 0");
  Tensor out = data;
  if (sigma == 0.0)
    return out;
  std::normal_distribution<double> noise(0.0, sigma);
  for (double &v : out.storage())
    v += noise(rng);
  return out;
}

// ---- splits -----------------------------------------------------------------

const char *split_strategy_name(SplitStrategy s) {
  switch (s) {
  case SplitStrategy::per_recording: return "per_recording";
  case SplitStrategy::activity_stacked: return "activity_stacked";
  case SplitStrategy::leave_one_subject_out: return "leave_one_subject_out";
  }
  return "?";
}

SplitStrategy parse_split_strategy(const std::string &name) {
  for (SplitStrategy s : {SplitStrategy::per_recording, SplitStrategy::activity_stacked,
                          SplitStrategy::leave_one_subject_out})
    if (name == split_strategy_name(s))
      return s;
  throw ConfigError("unknown split strategy '" + name + "'");
}

void SplitSpec::validate() const {
  for (double f : {train, val, test, loso_train})
    if (!(f >= 0.0 && f <= 1.0))
      throw ConfigError("split fractions must lie in [0, 1]");
  if (std::abs(train + val + test - 1.0) > 1e-9)
    throw ConfigError("split fractions must sum to 1");
  if (strategy == SplitStrategy::leave_one_subject_out && !held_out_subject)
    throw ConfigError("leave_one_subject_out needs held_out_subject");
}

std::pair<std::size_t, std::size_t> cut_points(std::size_t n, double train, double val) {
  const double dn = static_cast<double>(n);
  std::size_t a = static_cast<std::size_t>(std::floor(dn * train + 1e-9));
  std::size_t b = static_cast<std::size_t>(std::floor(dn * (train + val) + 1e-9));
  a = std::min(a, n);
  b = std::clamp(b, a, n);
  return {a, b};
}

namespace {

template <class Key>
std::vector<std::pair<Key, std::vector<std::size_t>>> group_in_order(
    const std::vector<Window> &windows, Key (*key)(const Window &)) {
  std::vector<std::pair<Key, std::vector<std::size_t>>> groups;
  std::map<Key, std::size_t> where;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const Key k = key(windows[i]);
    auto [it, fresh] = where.emplace(k, groups.size());
    if (fresh)
      groups.push_back({k, {}});
    groups[it->second].second.push_back(i);
  }
  return groups;
}

std::string by_recording(const Window &w) { return w.recording_id; }
std::pair<int, int> by_subject_activity(const Window &w) { return {w.subject_id, w.activity}; }

} // namespace

Splits split(const std::vector<Window> &windows, const SplitSpec &spec) {
  spec.validate();
  Splits out;
  auto take = [&](std::vector<Window> &dst, const std::vector<std::size_t> &idx, std::size_t from,
                  std::size_t to) {
    for (std::size_t i = from; i < to; ++i)
      dst.push_back(windows[idx[i]]);
  };

  switch (spec.strategy) {
  case SplitStrategy::per_recording:
    for (const auto &[_, idx] : group_in_order(windows, &by_recording)) {
      const auto [a, b] = cut_points(idx.size(), spec.train, spec.val);
      take(out.train, idx, 0, a);
      take(out.val, idx, a, b);
      take(out.test, idx, b, idx.size());
    }
    break;
  case SplitStrategy::activity_stacked: {
    for (const Window &w : windows)
      if (w.activity < 0)
        throw DataError("activity_stacked split needs activity labels; window of recording '" +
                        w.recording_id + "' at frame " + std::to_string(w.start_frame) +
                        " is unlabeled");
    for (const auto &[_, idx] : group_in_order(windows, &by_subject_activity)) {
      const std::size_t n = idx.size();
      auto [a, b] = cut_points(n, spec.train, spec.val);
      if (n >= 3) {
        a = std::clamp<std::size_t>(a, 1, n - 2);
        b = std::clamp<std::size_t>(b, a + 1, n - 1);
      }
      take(out.train, idx, 0, a);
      take(out.val, idx, a, b);
      take(out.test, idx, b, n);
    }
    break;
  }
  case SplitStrategy::leave_one_subject_out: {
    const int held = *spec.held_out_subject;
    bool found = false;
    for (const auto &[_, idx] : group_in_order(windows, &by_recording)) {
      if (windows[idx.front()].subject_id == held) {
        found = true;
        take(out.test, idx, 0, idx.size());
        continue;
      }
      const auto [a, b] = cut_points(idx.size(), spec.loso_train, 1.0 - spec.loso_train);
      take(out.train, idx, 0, a);
      take(out.val, idx, a, idx.size());
      (void)b;
    }
    if (!found)
      throw DataError("held-out subject " + std::to_string(held) + " has no windows");
    break;
  }
  }
  return out;
}

std::vector<int> subject_ids(const std::vector<Window> &windows) {
  std::set<int> ids;
  for (const Window &w : windows)
    ids.insert(w.subject_id);
  return {ids.begin(), ids.end()};
}

} // namespace tcnimu
