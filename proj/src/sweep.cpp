#include "gsadvisor/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <thread>

#include "gsadvisor/error.hpp"
#include "gsadvisor/hashing.hpp"

namespace gsadvisor {
namespace {

using nlohmann::json;

using PairKey = std::pair<std::string, std::string>;  // (prompt_id, format_scale(scale))

json record_to_json(const SweepRecord& r) {
  json per_sample = json::array();
  for (Eigen::Index j = 0; j < r.per_sample.rows(); ++j) {
    std::vector<double> row(static_cast<std::size_t>(r.per_sample.cols()));
    for (Eigen::Index m = 0; m < r.per_sample.cols(); ++m) row[static_cast<std::size_t>(m)] = r.per_sample(j, m);
    per_sample.push_back(std::move(row));
  }
  json out = {{"id", r.prompt_id},
              {"scale", r.scale},
              {"per_sample", per_sample},
              {"aggregate", std::vector<double>(r.aggregate.data(), r.aggregate.data() + r.aggregate.size())}};
  if (!r.provider_meta.is_null()) out["meta"] = r.provider_meta;
  return out;
}

// Parses a row; `oriented` says whether "aggregate" is already oriented.
SweepRecord record_from_json(const json& row, const MetricSchema& schema, bool oriented) {
  SweepRecord r;
  r.prompt_id = row.at("id").get<std::string>();
  r.scale = row.at("scale").get<double>();
  const auto& samples = row.at("per_sample");
  const auto d_q = static_cast<Eigen::Index>(schema.size());
  r.per_sample.resize(static_cast<Eigen::Index>(samples.size()), d_q);
  for (std::size_t j = 0; j < samples.size(); ++j) {
    const auto& s = samples[j];
    if (!s.is_array() || static_cast<Eigen::Index>(s.size()) != d_q) {
      throw Error(ErrorCode::kFormatError, "per_sample row width does not match the metric schema");
    }
    for (Eigen::Index m = 0; m < d_q; ++m) r.per_sample(static_cast<Eigen::Index>(j), m) = s[static_cast<std::size_t>(m)].get<double>();
  }
  const auto aggregate = row.at("aggregate").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(aggregate.size()) != d_q) {
    throw Error(ErrorCode::kFormatError, "aggregate width does not match the metric schema");
  }
  r.aggregate = Eigen::Map<const Eigen::VectorXd>(aggregate.data(), d_q);
  if (!oriented) {
    for (std::size_t m = 0; m < schema.size(); ++m) r.aggregate[static_cast<Eigen::Index>(m)] *= schema.sign(m);
  }
  if (auto it = row.find("meta"); it != row.end()) r.provider_meta = *it;
  return r;
}

Eigen::VectorXd oriented_mean(const Eigen::MatrixXd& per_sample, const MetricSchema& schema) {
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(per_sample.cols());
  for (Eigen::Index m = 0; m < per_sample.cols(); ++m) {
    const double sign = schema.sign(static_cast<std::size_t>(m));
    double sum = 0.0;
    for (Eigen::Index j = 0; j < per_sample.rows(); ++j) sum += sign * per_sample(j, m);
    mean[m] = sum / static_cast<double>(per_sample.rows());
  }
  return mean;
}

void check_orientation(const SweepRecord& r, const MetricSchema& schema) {
  const Eigen::VectorXd expected = oriented_mean(r.per_sample, schema);
  for (Eigen::Index m = 0; m < expected.size(); ++m) {
    const double tol = 1e-12 * std::max(1.0, std::abs(expected[m]));
    if (!(std::abs(expected[m] - r.aggregate[m]) <= tol)) {
      throw Error(ErrorCode::kOrientationConflict,
                  "aggregate of (" + r.prompt_id + ", " + format_scale(r.scale) + ") metric " + schema.names()[static_cast<std::size_t>(m)] +
                      " is not the oriented mean of its samples");
    }
  }
}

json schema_to_json(const MetricSchema& schema) {
  std::vector<std::string> directions;
  for (auto d : schema.directions()) directions.emplace_back(to_string(d));
  return {{"names", schema.names()}, {"directions", directions}};
}

MetricSchema schema_from_json(const json& j) {
  std::vector<Direction> directions;
  for (const auto& d : j.at("directions")) directions.push_back(parse_direction(d.get<std::string>()));
  return MetricSchema(j.at("names").get<std::vector<std::string>>(), std::move(directions));
}

class Journal {
 public:
  Journal(const std::filesystem::path& dir, const std::string& plan_fingerprint) : dir_(dir) {
    std::filesystem::create_directories(dir_);
    check_plan(plan_fingerprint);
    load();
    journal_.open(dir_ / "journal.tsv", std::ios::app);
    records_.open(dir_ / "records.jsonl", std::ios::app);
    if (!journal_ || !records_) throw Error(ErrorCode::kIoError, "cannot open journal in " + dir_.string());
  }

  const std::map<PairKey, SweepRecord>& completed() const { return completed_; }

  void append(const SweepRecord& record) {
    std::lock_guard lock(mutex_);
    records_ << record_to_json(record).dump() << '\n';
    records_.flush();
    journal_ << record.prompt_id << '\t' << format_scale(record.scale) << "\tdone\n";
    journal_.flush();
  }

 private:
  // Records from another seed, sample count, schema or provider must not be
  // mixed into this run.
  void check_plan(const std::string& fingerprint) {
    const auto path = dir_ / "plan.txt";
    if (std::ifstream in(path); in) {
      std::string existing;
      std::getline(in, existing);
      if (existing != fingerprint) {
        throw Error(ErrorCode::kInvalidArgument,
                    "journal " + dir_.string() + " belongs to a different sweep plan; remove it or pick another directory");
      }
      return;
    }
    std::ofstream out(path);
    out << fingerprint << '\n';
    if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  }

  void load() {
    std::set<PairKey> done;
    if (std::ifstream in(dir_ / "journal.tsv"); in) {
      std::string line;
      while (std::getline(in, line)) {
        const auto t1 = line.find('\t');
        const auto t2 = line.find('\t', t1 == std::string::npos ? t1 : t1 + 1);
        if (t1 == std::string::npos || t2 == std::string::npos || line.substr(t2 + 1) != "done") continue;
        done.emplace(line.substr(0, t1), line.substr(t1 + 1, t2 - t1 - 1));
      }
    }
    if (std::ifstream in(dir_ / "records.jsonl"); in) {
      std::string line;
      while (std::getline(in, line)) {
        json row;
        try {
          row = json::parse(line);
        } catch (const json::parse_error&) {
          continue;  // torn final line from an interrupted write
        }
        pending_rows_.push_back(std::move(row));
      }
    }
    done_ = std::move(done);
  }

 public:
  // Records need the schema to parse, so resolution happens after construction.
  void resolve(const MetricSchema& schema) {
    for (const auto& row : pending_rows_) {
      SweepRecord r = record_from_json(row, schema, true);
      PairKey key{r.prompt_id, format_scale(r.scale)};
      if (done_.count(key) != 0) completed_.insert_or_assign(std::move(key), std::move(r));
    }
    pending_rows_.clear();
  }

 private:
  std::filesystem::path dir_;
  std::set<PairKey> done_;
  std::vector<json> pending_rows_;
  std::map<PairKey, SweepRecord> completed_;
  std::ofstream journal_;
  std::ofstream records_;
  std::mutex mutex_;
};

bool retryable(ErrorCode code) {
  return code == ErrorCode::kTimeout || code == ErrorCode::kMalformedResponse || code == ErrorCode::kHttpStatus ||
         code == ErrorCode::kProviderUnreachable;
}

}  // namespace

std::string format_scale(double scale) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), scale);
  return std::string(buf, res.ptr);
}

SweepRecord make_record(std::string prompt_id, double scale, Eigen::MatrixXd per_sample, const MetricSchema& schema,
                        nlohmann::json meta) {
  if (per_sample.rows() == 0) throw Error(ErrorCode::kInvalidArgument, "a sweep record needs at least one sample");
  if (static_cast<std::size_t>(per_sample.cols()) != schema.size()) {
    throw Error(ErrorCode::kScoreSchemaMismatch, "sample width does not match the metric schema");
  }
  if (!per_sample.allFinite()) throw Error(ErrorCode::kInvalidArgument, "per-sample scores must be finite");
  SweepRecord r;
  r.prompt_id = std::move(prompt_id);
  r.scale = scale;
  r.aggregate = oriented_mean(per_sample, schema);
  r.per_sample = std::move(per_sample);
  r.provider_meta = std::move(meta);
  return r;
}

SweepOutput run_sweep(const SweepPlan& plan, QualityProvider& provider, const SweepOptions& options) {
  const auto started = std::chrono::steady_clock::now();
  if (plan.samples_per_pair == 0) throw Error(ErrorCode::kInvalidArgument, "samples_per_pair must be >= 1");
  std::set<std::string> ids;
  for (const auto& p : plan.prompts) {
    if (!ids.insert(p.id).second) throw Error(ErrorCode::kDuplicateId, "duplicate prompt id " + p.id);
  }

  SweepOutput out;
  out.report.total_pairs = plan.total_pairs();
  out.report.total_work = plan.total_work();
  if (options.log) {
    options.log("sweep: " + std::to_string(plan.prompts.size()) + " prompts x " + std::to_string(plan.grid.size()) +
                " scales x " + std::to_string(plan.samples_per_pair) + " samples = " +
                std::to_string(plan.total_work()) + " generations via " + provider.describe());
  }

  provider.check_reachable();

  std::optional<Journal> journal;
  if (options.journal_dir) {
    const std::uint64_t fingerprint = StableHasher{}
                                          .add(plan.seed_base)
                                          .add(std::uint64_t{plan.samples_per_pair})
                                          .add(plan.schema.to_spec())
                                          .add(provider.describe())
                                          .digest();
    journal.emplace(*options.journal_dir, std::to_string(fingerprint));
    journal->resolve(plan.schema);
  }

  // Canonical pair order: prompt id, then ascending scale.
  std::vector<const PromptRecord*> prompts;
  for (const auto& p : plan.prompts) prompts.push_back(&p);
  std::sort(prompts.begin(), prompts.end(), [](auto* a, auto* b) { return a->id < b->id; });

  struct Task {
    const PromptRecord* prompt;
    double scale;
  };
  std::vector<Task> tasks;
  std::vector<std::optional<SweepRecord>> results;
  for (const auto* p : prompts) {
    for (double scale : plan.grid.scales()) {
      tasks.push_back({p, scale});
      results.emplace_back();
      if (journal) {
        auto it = journal->completed().find({p->id, format_scale(scale)});
        if (it != journal->completed().end()) {
          results.back() = it->second;
          ++out.report.resumed;
        }
      }
    }
  }

  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> claimed{0};
  std::mutex failure_mutex;
  std::exception_ptr fatal;
  std::atomic<bool> abort{false};

  auto worker = [&] {
    while (!abort.load()) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      if (results[i]) continue;
      if (options.stop_after && claimed.fetch_add(1) >= *options.stop_after) return;

      const auto& task = tasks[i];
      std::string last_error;
      std::size_t attempt = 0;
      for (; attempt <= options.max_retries; ++attempt) {
        try {
          PairScores scores =
              provider.score_pair(*task.prompt, task.scale, plan.seed_base, plan.samples_per_pair, plan.schema);
          if (static_cast<std::size_t>(scores.raw.rows()) != plan.samples_per_pair) {
            throw Error(ErrorCode::kMalformedResponse, "provider returned the wrong number of samples");
          }
          SweepRecord record =
              make_record(task.prompt->id, task.scale, std::move(scores.raw), plan.schema, std::move(scores.meta));
          if (journal) journal->append(record);
          results[i] = std::move(record);
          break;
        } catch (const Error& e) {
          if (!retryable(e.code())) {
            std::lock_guard lock(failure_mutex);
            if (!fatal) fatal = std::current_exception();
            abort.store(true);
            return;
          }
          last_error = e.what();
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!fatal) fatal = std::current_exception();
          abort.store(true);
          return;
        }
      }
      if (!results[i]) {
        std::lock_guard lock(failure_mutex);
        out.report.failures.push_back({task.prompt->id, task.scale, attempt, last_error});
      }
    }
  };

  const std::size_t width = std::max<std::size_t>(1, std::min(options.workers, tasks.size()));
  if (width == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < width; ++t) pool.emplace_back(worker);
  }
  if (fatal) std::rethrow_exception(fatal);

  std::size_t scored_now = 0;
  for (auto& r : results) {
    if (r) out.records.push_back(std::move(*r));
  }
  scored_now = out.records.size() - out.report.resumed;
  out.report.completed = scored_now;
  out.report.interrupted = out.records.size() + out.report.failures.size() < tasks.size();
  std::sort(out.report.failures.begin(), out.report.failures.end(), [](const auto& a, const auto& b) {
    return std::tie(a.prompt_id, a.scale) < std::tie(b.prompt_id, b.scale);
  });

  out.report.elapsed_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  if (scored_now > 0) out.report.mean_pair_seconds = out.report.elapsed_seconds / static_cast<double>(scored_now);
  if (options.log) {
    options.log("sweep: " + std::to_string(scored_now) + " pairs scored, " + std::to_string(out.report.resumed) +
                " resumed, " + std::to_string(out.report.failures.size()) + " failed");
  }
  return out;
}

// ---------------------------------------------------------------------------

void write_dataset(std::span<const SweepRecord> records, const MetricSchema& schema, std::size_t n_g,
                   const std::filesystem::path& path) {
  for (const auto& r : records) {
    if (static_cast<std::size_t>(r.per_sample.cols()) != schema.size() ||
        static_cast<std::size_t>(r.aggregate.size()) != schema.size()) {
      throw Error(ErrorCode::kSchemaMismatch, "record width does not match the metric schema");
    }
    check_orientation(r, schema);
  }
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIoError, "cannot write dataset " + path.string());
    out << json{{"schema", kSweepSchema}, {"metric_schema", schema_to_json(schema)}, {"oriented", true}, {"n_g", n_g}}
               .dump()
        << '\n';
    for (const auto& r : records) out << record_to_json(r).dump() << '\n';
    if (!out) throw Error(ErrorCode::kIoError, "failed writing " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

SweepDataset read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open dataset " + path.string());
  SweepDataset ds;
  bool have_header = false;
  bool oriented = true;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto where = path.string() + ":" + std::to_string(line_no);
    try {
      const json row = json::parse(line);
      if (!have_header) {
        if (row.value("schema", "") != kSweepSchema) throw Error(ErrorCode::kFormatError, where + ": expected sweep.v1 header");
        ds.schema = schema_from_json(row.at("metric_schema"));
        oriented = row.at("oriented").get<bool>();
        ds.n_g = row.at("n_g").get<std::size_t>();
        have_header = true;
        continue;
      }
      SweepRecord r = record_from_json(row, ds.schema, oriented);
      check_orientation(r, ds.schema);
      ds.records.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kFormatError, where + ": " + e.what());
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kOrientationConflict) {
        throw Error(e.code(), where + ": " + e.what() + (oriented ? " (header says oriented)" : " (header says raw)"));
      }
      throw;
    }
  }
  if (!have_header) throw Error(ErrorCode::kFormatError, path.string() + ": missing header");
  return ds;
}

TrainingSet make_training_set(const SweepDataset& dataset, std::span<const PromptRecord> prompts,
                              const PromptFeaturizer& featurizer) {
  std::map<std::string, const PromptRecord*> by_id;
  for (const auto& p : prompts) by_id.emplace(p.id, &p);
  TrainingSet set;
  std::map<std::string, std::size_t> prompt_index;
  for (const auto& r : dataset.records) {
    auto it = prompt_index.find(r.prompt_id);
    if (it == prompt_index.end()) {
      auto p = by_id.find(r.prompt_id);
      if (p == by_id.end()) throw Error(ErrorCode::kFormatError, "dataset references unknown prompt " + r.prompt_id);
      it = prompt_index.emplace(r.prompt_id, set.prompts.size()).first;
      set.prompts.push_back(featurizer.featurize(*p->second));
    }
    set.rows.push_back(TrainingSet::Row{it->second, r.scale, r.aggregate});
  }
  return set;
}

}  // namespace gsadvisor
