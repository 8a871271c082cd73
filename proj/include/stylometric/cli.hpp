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

#ifndef STYLOMETRIC_CLI_HPP_
#define STYLOMETRIC_CLI_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"
#include "stylometric/metrics.hpp"

namespace stylometric::cli {

inline constexpr const char* kThreadsEnvVar = "STYLOMETRIC_THREADS";

// Resolved settings for one command. Defaults: t = 25, idx = 1, W2,
// k in {1, 10, 100}, all cores.
struct RunConfig {
  std::uint32_t t = 25;
  std::uint32_t idx = 1;
  MetricKind metric = MetricKind::kW2;
  std::vector<std::size_t> ks = {1, 10, 100};
  std::size_t threads = 0;
  bool artsplit = false;
  bool allow_missing = false;

  std::filesystem::path features;
  std::filesystem::path store;
  std::filesystem::path queries;
  std::filesystem::path manifest;
  std::filesystem::path query_manifest;
  std::filesystem::path grid;
  std::filesystem::path out;
  std::filesystem::path csv;
};

// Overlays the keys present in `config` onto `base`. Unknown keys and
// ill-typed values throw Error{kInvalidArgument}.
RunConfig ApplyConfigJson(RunConfig base, const nlohmann::json& config);

// Subcommand bodies; stdout carries data, stderr diagnostics. Each returns
// the process exit code.
int CmdDescriptors(const RunConfig& config, bool require_manifest,
                   std::ostream& out, std::ostream& err);
int CmdQuery(const RunConfig& config, std::ostream& out, std::ostream& err);
int CmdEval(const RunConfig& config, std::ostream& out, std::ostream& err);
int CmdSweep(const RunConfig& config, std::ostream& out, std::ostream& err);

// Full command-line entry point; `args` excludes the program name.
int Run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err);

}  // namespace stylometric::cli

#endif  // STYLOMETRIC_CLI_HPP_
