#pragma once

#include <algorithm>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "talents/core/error.hpp"
#include "talents/kitchen/trajectory.hpp"
#include "talents/partners/population.hpp"

namespace talents::partners {

namespace fs = std::filesystem;

/// One trajectory file in a dataset index.
struct DatasetEntry {
  std::string file;  // relative to the dataset directory
  std::string layout;
  std::uint64_t seed = 0;
  std::array<std::string, 2> seats;
  int episode = 0;
  int checkpoint = 0;
  int score = 0;
  friend bool operator==(const DatasetEntry&, const DatasetEntry&) = default;
};

struct Dataset {
  std::string dir;
  std::vector<DatasetEntry> entries;

  std::string path(const DatasetEntry& e) const { return (fs::path(dir) / e.file).string(); }
  kitchen::Trajectory load(const DatasetEntry& e) const { return kitchen::load_trajectory(path(e)); }
  std::size_t size() const { return entries.size(); }
};

// Index file, tab separated:
//   #talents-dataset 1
//   #columns file layout seed seat0 seat1 episode checkpoint score
//   <one row per trajectory>
inline constexpr std::string_view kDatasetMagic = "#talents-dataset 1";
inline constexpr const char* kIndexName = "index.tsv";

inline void write_index(std::ostream& os, const std::vector<DatasetEntry>& entries) {
  os << kDatasetMagic << "\n#columns file layout seed seat0 seat1 episode checkpoint score\n";
  for (const auto& e : entries)
    os << e.file << '\t' << e.layout << '\t' << e.seed << '\t' << e.seats[0] << '\t' << e.seats[1] << '\t' << e.episode
       << '\t' << e.checkpoint << '\t' << e.score << '\n';
}

inline std::vector<DatasetEntry> read_index(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kDatasetMagic) throw FormatError("dataset index: missing magic line");
  std::vector<DatasetEntry> out;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto cols = kitchen::detail::split(line, '\t');
    if (cols.size() != 8) throw FormatError("dataset index: expected 8 columns");
    DatasetEntry e;
    e.file = cols[0];
    e.layout = cols[1];
    try {
      e.seed = std::stoull(cols[2]);
    } catch (const std::exception&) {
      throw FormatError("dataset index: bad seed '" + cols[2] + "'");
    }
    e.seats = {cols[3], cols[4]};
    e.episode = kitchen::detail::parse_int(cols[5]);
    e.checkpoint = kitchen::detail::parse_int(cols[6]);
    e.score = kitchen::detail::parse_int(cols[7]);
    out.push_back(std::move(e));
  }
  return out;
}

inline void save_index(const Dataset& d) {
  const auto path = fs::path(d.dir) / kIndexName;
  std::ofstream f(path);
  if (!f) throw IoError("cannot write dataset index " + path.string());
  write_index(f, d.entries);
  if (!f) throw IoError("write failed for " + path.string());
}

inline Dataset load_dataset(const std::string& dir) {
  const auto path = fs::path(dir) / kIndexName;
  std::ifstream f(path);
  if (!f) throw IoError("cannot open dataset index " + path.string());
  return {dir, read_index(f)};
}

struct CollectOptions {
  std::string out_dir;
  int episode_length = 0;  // <= 0: layout default
  int workers = 1;
  bool vary_checkpoints = true;  // cycle the emulated checkpoint noise across episodes
  /// Pair every policy with the neutral reference filler instead of with
  /// every other policy.
  bool reference = false;
  /// Writes one trajectory file; replaceable for fault injection.
  std::function<void(const std::string&, const kitchen::Trajectory&)> writer = kitchen::save_trajectory;
};

/// Plays every unordered pair of policies (self-pairs included), or every
/// policy against the reference filler, for `episodes_per_pair` episodes on
/// each layout, writes one trajectory file
/// per episode plus the index, and returns the index. Seats alternate
/// between episodes. On any write failure, files already written by this
/// call are removed and IoError is thrown.
inline Dataset collect_rollouts(const std::vector<ScriptedPolicy>& policies, const std::vector<std::string>& layouts,
                                int episodes_per_pair, std::uint64_t seed, const CollectOptions& opt) {
  if (policies.size() < (opt.reference ? 1u : 2u)) throw ConfigError("collect_rollouts needs at least 2 policies");
  if (episodes_per_pair < 1) throw ConfigError("episodes_per_pair must be at least 1");
  if (layouts.empty()) throw ConfigError("collect_rollouts needs at least one layout");
  std::vector<kitchen::LayoutPtr> resolved;
  for (const auto& name : layouts) resolved.push_back(kitchen::builtin_layout(name));

  struct Job {
    std::size_t layout;
    std::size_t a, b;
    int episode;
    int checkpoint;
    std::uint64_t seed;
    std::string file;
  };
  std::vector<ScriptedPolicy> pool = policies;
  if (opt.reference) pool.push_back(reference_partner());
  const std::size_t ref = policies.size();
  std::vector<Job> jobs;
  std::size_t pair_index = 0;
  for (std::size_t li = 0; li < resolved.size(); ++li) {
    pair_index = 0;
    for (std::size_t i = 0; i < policies.size(); ++i)
      for (std::size_t j = opt.reference ? ref : i; j < (opt.reference ? ref + 1 : policies.size()); ++j, ++pair_index)
        for (int e = 0; e < episodes_per_pair; ++e) {
          Job job;
          job.layout = li;
          job.a = e % 2 == 0 ? i : j;
          job.b = e % 2 == 0 ? j : i;
          job.episode = e;
          job.checkpoint = opt.vary_checkpoints
                               ? static_cast<int>((static_cast<std::size_t>(e) + pair_index + li) % kCheckpointNoise.size())
                               : 0;
          job.seed = derive_seed(seed, (li << 40) ^ (i << 24) ^ (j << 12) ^ static_cast<std::uint64_t>(e));
          job.file = layouts[li] + "/" + pool[job.a].id() + "-" + pool[job.b].id() + "-e" + std::to_string(e) +
                     ".traj";
          jobs.push_back(std::move(job));
        }
  }

  Dataset d;
  d.dir = opt.out_dir;
  std::error_code ec;
  for (const auto& name : layouts) {
    fs::create_directories(fs::path(opt.out_dir) / name, ec);
    if (ec) throw IoError("cannot create dataset directory " + (fs::path(opt.out_dir) / name).string() + ": " + ec.message());
  }

  std::vector<DatasetEntry> entries(jobs.size());
  std::vector<char> written(jobs.size(), 0);
  std::mutex mu;
  std::exception_ptr failure;
  std::size_t next = 0;
  auto worker = [&] {
    for (;;) {
      std::size_t k;
      {
        std::lock_guard lock(mu);
        if (failure || next >= jobs.size()) return;
        k = next++;
      }
      const Job& job = jobs[k];
      const double eps = kCheckpointNoise[static_cast<std::size_t>(job.checkpoint)];
      auto noisy = [&](std::size_t i) { return opt.reference && i == ref ? pool[i] : pool[i].with_noise(eps); };
      ScriptedPolicy a = noisy(job.a), b = noisy(job.b);
      EpisodeOptions eo;
      eo.episode_length = opt.episode_length;
      kitchen::Trajectory t = play_episode(a, b, resolved[job.layout], job.seed, eo);
      try {
        opt.writer((fs::path(opt.out_dir) / job.file).string(), t);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
        written[k] = 1;  // may be partially written
        return;
      }
      std::lock_guard lock(mu);
      written[k] = 1;
      entries[k] = {job.file, layouts[job.layout], job.seed, t.policy_ids, job.episode, job.checkpoint, t.score};
    }
  };
  const int n_workers = std::max(1, opt.workers);
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) {
    for (std::size_t k = 0; k < jobs.size(); ++k)
      if (written[k]) fs::remove(fs::path(opt.out_dir) / jobs[k].file, ec);
    fs::remove(fs::path(opt.out_dir) / kIndexName, ec);
    try {
      std::rethrow_exception(failure);
    } catch (const IoError&) {
      throw;
    } catch (const std::exception& ex) {
      throw IoError(std::string("trajectory write failed: ") + ex.what());
    }
  }
  d.entries = std::move(entries);
  save_index(d);
  return d;
}

/// Splits a dataset so that no train trajectory has a holdout policy in
/// either seat.
inline std::pair<Dataset, Dataset> holdout_split(const Dataset& d, const std::vector<std::string>& holdout_ids) {
  const std::set<std::string> hold(holdout_ids.begin(), holdout_ids.end());
  if (!hold.empty()) {
    bool any = false;
    for (const auto& e : d.entries) any = any || hold.count(e.seats[0]) || hold.count(e.seats[1]);
    if (!any) throw ConfigError("holdout ids do not occur in the dataset");
  }
  Dataset train{d.dir, {}}, held{d.dir, {}};
  for (const auto& e : d.entries) {
    if (hold.count(e.seats[0]) || hold.count(e.seats[1])) held.entries.push_back(e);
    else train.entries.push_back(e);
  }
  if (train.entries.empty()) throw ConfigError("holdout split leaves an empty train set");
  return {std::move(train), std::move(held)};
}

}  // namespace talents::partners
