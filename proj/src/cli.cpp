/*
 * Copyright 2026 The Stylometric Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "stylometric/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <unordered_set>

#include "CLI11.hpp"
#include "parallel.hpp"
#include "stylometric/descriptor.hpp"
#include "stylometric/error.hpp"
#include "stylometric/eval.hpp"
#include "stylometric/feature_store.hpp"
#include "stylometric/retrieval.hpp"

namespace fs = std::filesystem;

namespace stylometric::cli {

namespace {

std::string Dump(const nlohmann::ordered_json& j, int indent = -1) {
  return j.dump(indent, ' ', false, nlohmann::json::error_handler_t::replace);
}

void ReportError(std::ostream& err, const Error& e) {
  err << "error: [" << ErrorKindName(e.kind()) << "] " << e.what() << '\n';
}

void CheckKList(const std::vector<std::size_t>& ks) {
  if (ks.empty()) throw Error(ErrorKind::kInvalidArgument, "--k needs at least one value");
  for (std::size_t i = 0; i < ks.size(); ++i) {
    if (ks[i] == 0 || (i > 0 && ks[i] <= ks[i - 1])) {
      throw Error(ErrorKind::kInvalidArgument,
                  "k values must be positive and strictly increasing");
    }
  }
}

MetricKind ParseMetricOrThrow(const std::string& name) {
  auto kind = ParseMetricKind(name);
  if (!kind) {
    throw Error(ErrorKind::kInvalidArgument,
                "unknown metric '" + name + "' (expected w2, l2, gram, kl or jsd)");
  }
  return *kind;
}

std::size_t ParseThreadsEnv() {
  const char* raw = std::getenv(kThreadsEnvVar);
  if (raw == nullptr || *raw == '\0') return 0;
  try {
    std::size_t used = 0;
    const long long v = std::stoll(raw, &used);
    if (used != std::strlen(raw) || v < 0) throw std::invalid_argument(raw);
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    throw Error(ErrorKind::kInvalidArgument,
                std::string(kThreadsEnvVar) + " must be a non-negative integer, got '" +
                    raw + "'");
  }
}

// Provenance guard shared by query/eval/sweep: a store must carry the run's
// (t, idx).
void CheckStoreProvenance(const DescriptorStore& store, const fs::path& path,
                          std::uint32_t t, std::uint32_t idx) {
  if (store.t != t || store.idx != idx) {
    throw Error(ErrorKind::kProvenanceMismatch,
                path.string() + ": store holds (t=" + std::to_string(store.t) +
                    ", idx=" + std::to_string(store.idx) + ") but the run expects (t=" +
                    std::to_string(t) + ", idx=" + std::to_string(idx) +
                    "); pass --t/--idx to match");
  }
}

void CheckSameWidth(const DescriptorStore& a, const fs::path& pa,
                    const DescriptorStore& b, const fs::path& pb) {
  if (!a.descriptors.empty() && !b.descriptors.empty() && a.c != b.c) {
    throw Error(ErrorKind::kDimensionMismatch,
                pa.string() + " has " + std::to_string(a.c) + " channels, " +
                    pb.string() + " has " + std::to_string(b.c));
  }
}

std::vector<LabeledQuery> LabelQueries(std::vector<StyleDescriptor> descriptors,
                                       const DatasetManifest& manifest,
                                       const fs::path& manifest_path) {
  std::vector<LabeledQuery> out;
  out.reserve(descriptors.size());
  for (StyleDescriptor& d : descriptors) {
    const DatasetRecord* record = manifest.Find(d.image_id);
    if (record == nullptr) {
      throw Error(ErrorKind::kMissingLabel,
                  "query '" + d.image_id + "' has no record in " +
                      manifest_path.string());
    }
    out.push_back({std::move(d), record->style_label, record->semantic_label});
  }
  return out;
}

void WriteFile(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  f << text;
  f.close();
  if (!f) throw Error(ErrorKind::kIo, "cannot write '" + path.string() + "'");
}

}  // namespace

RunConfig ApplyConfigJson(RunConfig base, const nlohmann::json& config) {
  if (!config.is_object()) {
    throw Error(ErrorKind::kInvalidArgument, "config must be a JSON object");
  }
  auto path_field = [&](const char* key, fs::path& target) {
    if (auto it = config.find(key); it != config.end()) {
      if (!it->is_string()) {
        throw Error(ErrorKind::kInvalidArgument,
                    std::string("config key '") + key + "' must be a string");
      }
      target = it->get<std::string>();
    }
  };
  static const std::unordered_set<std::string> kKnown = {
      "t", "idx", "metric", "k", "threads", "artsplit", "allow_missing",
      "features", "store", "queries", "manifest", "query_manifest", "grid",
      "out", "csv"};
  for (const auto& [key, value] : config.items()) {
    if (!kKnown.contains(key)) {
      throw Error(ErrorKind::kInvalidArgument, "unknown config key '" + key + "'");
    }
  }
  try {
    if (config.contains("t")) base.t = config.at("t").get<std::uint32_t>();
    if (config.contains("idx")) base.idx = config.at("idx").get<std::uint32_t>();
    if (config.contains("metric")) {
      base.metric = ParseMetricOrThrow(config.at("metric").get<std::string>());
    }
    if (config.contains("k")) base.ks = config.at("k").get<std::vector<std::size_t>>();
    if (config.contains("threads")) base.threads = config.at("threads").get<std::size_t>();
    if (config.contains("artsplit")) base.artsplit = config.at("artsplit").get<bool>();
    if (config.contains("allow_missing")) {
      base.allow_missing = config.at("allow_missing").get<bool>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kInvalidArgument, std::string("config: ") + e.what());
  }
  path_field("features", base.features);
  path_field("store", base.store);
  path_field("queries", base.queries);
  path_field("manifest", base.manifest);
  path_field("query_manifest", base.query_manifest);
  path_field("grid", base.grid);
  path_field("out", base.out);
  path_field("csv", base.csv);
  return base;
}

int CmdDescriptors(const RunConfig& config, bool require_manifest,
                   std::ostream& out, std::ostream& err) {
  try {
    if (!fs::is_directory(config.features)) {
      throw Error(ErrorKind::kIo,
                  "feature directory '" + config.features.string() + "' not found");
    }
    std::optional<DatasetManifest> manifest;
    if (require_manifest) manifest = LoadManifestFile(config.manifest);

    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(config.features)) {
      if (entry.is_regular_file() && entry.path().extension() == ".ift1") {
        files.push_back(entry.path());
      }
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) {
      err << "warning: no .ift1 files in '" << config.features.string() << "'\n";
    }

    std::vector<std::optional<StyleDescriptor>> computed(files.size());
    std::vector<std::string> failure(files.size());
    internal::ParallelBlocks(files.size(), ResolveThreads(config.threads),
                             [&](std::size_t begin, std::size_t end) {
                               for (std::size_t i = begin; i < end; ++i) {
                                 try {
                                   computed[i] = ComputeDescriptor(
                                       ReadFeatureTensorFile(files[i]));
                                 } catch (const Error& e) {
                                   failure[i] = e.what();
                                 }
                               }
                             });

    DescriptorStore store;
    store.t = config.t;
    store.idx = config.idx;
    std::unordered_set<std::string> seen;
    std::size_t failed = 0;
    for (std::size_t i = 0; i < files.size(); ++i) {
      std::string problem = failure[i];
      if (problem.empty()) {
        const StyleDescriptor& d = *computed[i];
        if (d.t != config.t || d.idx != config.idx) {
          problem = "tensor '" + d.image_id + "' has (t=" + std::to_string(d.t) +
                    ", idx=" + std::to_string(d.idx) + "), run expects (t=" +
                    std::to_string(config.t) + ", idx=" + std::to_string(config.idx) + ")";
        } else if (!store.descriptors.empty() && d.channels() != store.c) {
          problem = "tensor '" + d.image_id + "' has " + std::to_string(d.channels()) +
                    " channels, earlier files have " + std::to_string(store.c);
        } else if (seen.contains(d.image_id)) {
          problem = "duplicate image_id '" + d.image_id + "'";
        } else if (manifest && manifest->Find(d.image_id) == nullptr) {
          problem = "image_id '" + d.image_id + "' has no manifest record";
        }
      }
      if (!problem.empty()) {
        ++failed;
        err << "error: " << files[i].filename().string() << ": " << problem << '\n';
        continue;
      }
      if (store.descriptors.empty()) store.c = static_cast<std::uint32_t>(computed[i]->channels());
      seen.insert(computed[i]->image_id);
      store.descriptors.push_back(std::move(*computed[i]));
    }
    WriteDescriptorStoreFile(store, config.out);
    nlohmann::ordered_json summary = {{"store", config.out.string()},
                                      {"records", store.descriptors.size()},
                                      {"failed", failed}};
    out << Dump(summary) << '\n';
    return failed == 0 ? 0 : 1;
  } catch (const Error& e) {
    ReportError(err, e);
    return 1;
  }
}

int CmdQuery(const RunConfig& config, std::ostream& out, std::ostream& err) {
  try {
    CheckKList(config.ks);
    const DescriptorStore refs = ReadDescriptorStoreFile(config.store);
    const DescriptorStore queries = ReadDescriptorStoreFile(config.queries);
    CheckStoreProvenance(refs, config.store, config.t, config.idx);
    CheckStoreProvenance(queries, config.queries, config.t, config.idx);
    CheckSameWidth(refs, config.store, queries, config.queries);
    const DatasetManifest manifest = LoadManifestFile(config.manifest);
    const DescriptorIndex index = DescriptorIndex::Build(refs.descriptors, manifest);

    const std::vector<RankedList> results =
        BatchQuery(index, queries.descriptors, config.metric, config.ks.back(),
                   config.threads);
    std::ostringstream lines;
    for (const RankedList& list : results) {
      nlohmann::ordered_json j;
      j["query_id"] = list.query_id;
      j["entries"] = nlohmann::ordered_json::array();
      for (const RankedEntry& e : list.entries) {
        j["entries"].push_back({{"image_id", e.image_id}, {"score", e.score}});
      }
      lines << Dump(j) << '\n';
    }
    if (config.out.empty()) {
      out << lines.str();
    } else {
      WriteFile(config.out, lines.str());
    }
    return 0;
  } catch (const Error& e) {
    ReportError(err, e);
    return 1;
  }
}

int CmdEval(const RunConfig& config, std::ostream& out, std::ostream& err) {
  try {
    CheckKList(config.ks);
    const DescriptorStore refs = ReadDescriptorStoreFile(config.store);
    DescriptorStore queries = ReadDescriptorStoreFile(config.queries);
    CheckStoreProvenance(refs, config.store, config.t, config.idx);
    CheckStoreProvenance(queries, config.queries, config.t, config.idx);
    CheckSameWidth(refs, config.store, queries, config.queries);
    const DatasetManifest manifest = LoadManifestFile(config.manifest);
    const fs::path query_manifest_path =
        config.query_manifest.empty() ? config.manifest : config.query_manifest;
    const DatasetManifest query_manifest = config.query_manifest.empty()
                                               ? manifest
                                               : LoadManifestFile(config.query_manifest);
    const DescriptorIndex index = DescriptorIndex::Build(refs.descriptors, manifest);
    const std::vector<LabeledQuery> labeled =
        LabelQueries(std::move(queries.descriptors), query_manifest, query_manifest_path);

    EvalOptions options{config.threads, config.store.string(), config.queries.string()};
    const EvalReport report =
        config.artsplit
            ? EvaluateArtSplit(index, labeled, config.metric, config.ks, options)
            : EvaluateRetrieval(index, labeled, config.metric, config.ks, options);

    const std::string json = Dump(ReportToJson(report), 2) + "\n";
    std::string csv = CsvHeader(report.config.protocol) + "\n";
    for (const std::string& row : CsvRows(report)) csv += row + "\n";

    if (config.out.empty()) {
      out << json;
    } else {
      WriteFile(config.out, json);
    }
    fs::path csv_path = config.csv;
    if (csv_path.empty() && !config.out.empty()) {
      csv_path = config.out;
      csv_path.replace_extension(".csv");
    }
    if (!csv_path.empty()) WriteFile(csv_path, csv);
    return 0;
  } catch (const Error& e) {
    ReportError(err, e);
    return 1;
  }
}

namespace {

struct GridCell {
  fs::path store;
  fs::path queries;
};

fs::path Resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

}  // namespace

int CmdSweep(const RunConfig& config, std::ostream& out, std::ostream& err) {
  try {
    CheckKList(config.ks);
    std::ifstream grid_file(config.grid);
    if (!grid_file) {
      throw Error(ErrorKind::kIo, "cannot open grid '" + config.grid.string() + "'");
    }
    const nlohmann::json grid_json = nlohmann::json::parse(grid_file, nullptr, false);
    if (grid_json.is_discarded() || !grid_json.is_object() ||
        !grid_json.contains("cells") || !grid_json["cells"].is_array()) {
      throw Error(ErrorKind::kInvalidArgument,
                  config.grid.string() + ": expected an object with a 'cells' array");
    }
    const fs::path base = config.grid.parent_path();

    SweepGrid grid;
    grid.protocol = config.artsplit ? Protocol::kArtSplit : Protocol::kRetrieval;
    std::map<std::pair<std::uint32_t, std::uint32_t>, GridCell> cells;
    try {
      for (const auto& cell : grid_json["cells"]) {
        const auto t = cell.at("t").get<std::uint32_t>();
        const auto idx = cell.at("idx").get<std::uint32_t>();
        grid.timesteps.push_back(t);
        grid.block_indices.push_back(idx);
        GridCell paths{Resolve(base, cell.at("store").get<std::string>()),
                       Resolve(base, cell.at("queries").get<std::string>())};
        if (!cells.emplace(std::make_pair(t, idx), paths).second) {
          throw Error(ErrorKind::kInvalidArgument,
                      "grid lists cell (t=" + std::to_string(t) + ", idx=" +
                          std::to_string(idx) + ") twice");
        }
      }
      if (grid_json.contains("metrics")) {
        for (const auto& name : grid_json["metrics"]) {
          grid.metrics.push_back(ParseMetricOrThrow(name.get<std::string>()));
        }
      } else {
        grid.metrics.push_back(config.metric);
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::kInvalidArgument, config.grid.string() + ": " + e.what());
    }

    auto manifest_path = [&](const fs::path& flag, const char* key) -> fs::path {
      if (!flag.empty()) return flag;
      if (grid_json.contains(key) && grid_json[key].is_string()) {
        return Resolve(base, grid_json[key].get<std::string>());
      }
      return {};
    };
    const fs::path ref_manifest_path = manifest_path(config.manifest, "manifest");
    fs::path query_manifest_path = manifest_path(config.query_manifest, "query_manifest");
    if (query_manifest_path.empty()) query_manifest_path = ref_manifest_path;
    const DatasetManifest manifest = LoadManifestFile(ref_manifest_path);
    const DatasetManifest query_manifest = query_manifest_path == ref_manifest_path
                                               ? manifest
                                               : LoadManifestFile(query_manifest_path);

    SweepCellLoader loader = [&](std::uint32_t t,
                                 std::uint32_t idx) -> std::optional<SweepCellData> {
      auto it = cells.find({t, idx});
      if (it == cells.end() || !fs::exists(it->second.store) ||
          !fs::exists(it->second.queries)) {
        return std::nullopt;
      }
      const DescriptorStore refs = ReadDescriptorStoreFile(it->second.store);
      DescriptorStore queries = ReadDescriptorStoreFile(it->second.queries);
      CheckStoreProvenance(refs, it->second.store, t, idx);
      CheckStoreProvenance(queries, it->second.queries, t, idx);
      CheckSameWidth(refs, it->second.store, queries, it->second.queries);
      return SweepCellData{
          DescriptorIndex::Build(refs.descriptors, manifest),
          LabelQueries(std::move(queries.descriptors), query_manifest,
                       query_manifest_path),
          it->second.store.string(), it->second.queries.string()};
    };

    const std::vector<SweepEntry> entries = Sweep(grid, loader, config.ks, config.threads);

    fs::create_directories(config.out);
    std::size_t missing = 0;
    for (const SweepEntry& e : entries) {
      if (!e.report) {
        ++missing;
        err << "warning: " << e.warning << ", metric " << MetricName(e.metric) << '\n';
        continue;
      }
      const std::string name = "report_t" + std::to_string(e.t) + "_idx" +
                               std::to_string(e.idx) + "_" +
                               std::string(MetricName(e.metric)) + ".json";
      WriteFile(config.out / name, Dump(ReportToJson(*e.report), 2) + "\n");
    }
    std::ostringstream csv;
    WriteSweepCsv(entries, csv);
    WriteFile(config.out / "sweep.csv", csv.str());
    out << csv.str();
    if (missing > 0 && !config.allow_missing) {
      err << "error: " << missing
          << " grid entries had no descriptors (use --allow-missing to accept)\n";
      return 1;
    }
    return 0;
  } catch (const Error& e) {
    ReportError(err, e);
    return 1;
  }
}

int Run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err) {
  CLI::App app{"Style retrieval over diffusion-feature Gaussian descriptors", "stylometric"};
  app.require_subcommand(1);

  RunConfig flags;
  std::string metric_name;
  fs::path config_path;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file (flags override it)");
    sub->add_option("--t", flags.t, "Diffusion timestep (default 25)");
    sub->add_option("--idx", flags.idx, "Up-block index (default 1)");
    sub->add_option("--threads", flags.threads, "Worker threads, 0 = all cores");
  };
  auto path = [&](CLI::App* sub, const std::string& name, fs::path& target,
                  const std::string& help) {
    sub->add_option("--" + name, target, help);
  };
  auto ranking = [&](CLI::App* sub) {
    sub->add_option("--metric", metric_name,
                    "Distance: w2, l2, gram, kl, jsd (default w2)");
    sub->add_option("--k", flags.ks, "Cutoffs, strictly increasing")->delimiter(',');
  };

  CLI::App* descriptors = app.add_subcommand("descriptors", "Feature tensors to an IDS1 store");
  common(descriptors);
  path(descriptors, "features", flags.features, "Directory of .ift1 files");
  path(descriptors, "out", flags.out, "Output descriptor store");

  CLI::App* index = app.add_subcommand(
      "index", "Like descriptors, also checking every id against a manifest");
  common(index);
  path(index, "features", flags.features, "Directory of .ift1 files");
  path(index, "manifest", flags.manifest, "Reference manifest (JSON lines)");
  path(index, "out", flags.out, "Output descriptor store");

  CLI::App* query = app.add_subcommand("query", "Top-k retrieval, JSON lines on stdout");
  common(query);
  ranking(query);
  path(query, "store", flags.store, "Reference descriptor store");
  path(query, "manifest", flags.manifest, "Reference manifest");
  path(query, "queries", flags.queries, "Query descriptor store");
  path(query, "out", flags.out, "Write results here instead of stdout");

  CLI::App* eval = app.add_subcommand("eval", "mAP@k / Recall@k or ArtSplit evaluation");
  common(eval);
  ranking(eval);
  path(eval, "store", flags.store, "Reference descriptor store");
  path(eval, "manifest", flags.manifest, "Reference manifest");
  path(eval, "queries", flags.queries, "Query descriptor store");
  path(eval, "query-manifest", flags.query_manifest,
       "Query labels (defaults to --manifest)");
  path(eval, "out", flags.out, "Report JSON path (stdout if absent)");
  path(eval, "csv", flags.csv, "CSV path (defaults to --out with .csv)");
  eval->add_flag("--artsplit", flags.artsplit, "Style/semantic dual protocol");

  CLI::App* sweep = app.add_subcommand("sweep", "Evaluate a (t, idx, metric) grid");
  common(sweep);
  ranking(sweep);
  path(sweep, "grid", flags.grid, "Grid definition (JSON)");
  path(sweep, "manifest", flags.manifest, "Reference manifest (overrides grid)");
  path(sweep, "query-manifest", flags.query_manifest, "Query manifest (overrides grid)");
  path(sweep, "out", flags.out, "Output directory");
  sweep->add_flag("--artsplit", flags.artsplit, "Style/semantic dual protocol");
  sweep->add_flag("--allow-missing", flags.allow_missing,
                  "Missing cells are warnings, not errors");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, r;
    const int code = app.exit(e, o, r);
    out << o.str();
    err << r.str();
    return code;
  }

  try {
    RunConfig config;
    bool threads_from_config = false;
    if (!config_path.empty()) {
      std::ifstream f(config_path);
      if (!f) throw Error(ErrorKind::kIo, "cannot open config '" + config_path.string() + "'");
      const nlohmann::json j = nlohmann::json::parse(f, nullptr, false);
      if (j.is_discarded()) {
        throw Error(ErrorKind::kInvalidArgument,
                    config_path.string() + ": not valid JSON");
      }
      config = ApplyConfigJson(config, j);
      threads_from_config = j.contains("threads");
    }

    // Flags given on the command line win over the config file.
    CLI::App* active = app.get_subcommands().front();
    auto given = [&](const std::string& flag) {
      const CLI::Option* o = active->get_option_no_throw(flag);
      return o != nullptr && o->count() > 0;
    };
    if (given("--t")) config.t = flags.t;
    if (given("--idx")) config.idx = flags.idx;
    if (given("--metric")) config.metric = ParseMetricOrThrow(metric_name);
    if (given("--k")) config.ks = flags.ks;
    if (given("--threads")) {
      config.threads = flags.threads;
    } else if (!threads_from_config) {
      config.threads = ParseThreadsEnv();
    }
    if (given("--artsplit")) config.artsplit = true;
    if (given("--allow-missing")) config.allow_missing = true;
    auto take = [&](const char* flag, fs::path RunConfig::*member) {
      if (given(flag)) config.*member = flags.*member;
    };
    take("--features", &RunConfig::features);
    take("--store", &RunConfig::store);
    take("--queries", &RunConfig::queries);
    take("--manifest", &RunConfig::manifest);
    take("--query-manifest", &RunConfig::query_manifest);
    take("--grid", &RunConfig::grid);
    take("--out", &RunConfig::out);
    take("--csv", &RunConfig::csv);

    if (config.t > kMaxTimestep || config.idx > kMaxBlockIndex) {
      throw Error(ErrorKind::kInvalidArgument,
                  "--t must be in [0, 999] and --idx in [0, 3]");
    }

    auto require = [&](const fs::path& p, const char* flag) {
      if (p.empty()) {
        throw Error(ErrorKind::kInvalidArgument,
                    std::string(flag) + " is required (flag or config key)");
      }
    };
    const std::string name = active->get_name();
    if (name == "descriptors" || name == "index") {
      require(config.features, "--features");
      require(config.out, "--out");
      if (name == "index") require(config.manifest, "--manifest");
      return CmdDescriptors(config, name == "index", out, err);
    }
    if (name == "query") {
      require(config.store, "--store");
      require(config.queries, "--queries");
      require(config.manifest, "--manifest");
      return CmdQuery(config, out, err);
    }
    if (name == "eval") {
      require(config.store, "--store");
      require(config.queries, "--queries");
      require(config.manifest, "--manifest");
      return CmdEval(config, out, err);
    }
    require(config.grid, "--grid");
    require(config.out, "--out");
    return CmdSweep(config, out, err);
  } catch (const Error& e) {
    ReportError(err, e);
    return 1;
  }
}

}  // namespace stylometric::cli
