#pragma once

// Benchmark ingestion: problem files per variant, optional preprocessing into
// a content-addressed cache, and a manifest of per-variant paths.

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "stratinv/solver_runner.hpp"

namespace stratinv {

struct VariantSpec {
  std::filesystem::path root;
  std::string glob = "*";
  // Placeholders {input} and {output}; without {output} stdout is the output.
  std::vector<std::string> preprocess;
};

struct BenchmarkSpec {
  std::string name;
  std::filesystem::path cache_dir;
  std::map<std::string, VariantSpec> variants;

  // {"name", "cache_dir", "variants": {id: {"root", "glob", "preprocess"}}};
  // relative paths resolve against `base_dir`. Throws ParseError/ValidationError.
  static BenchmarkSpec from_json(const json& document, const std::filesystem::path& base_dir);
  static BenchmarkSpec from_file(const std::filesystem::path& path);
};

struct Benchmark {
  std::string name;
  // Ids present in every variant; an id is the path relative to the variant root.
  std::vector<std::string> problem_ids;
  std::map<std::string, std::map<std::string, std::filesystem::path>> paths;  // variant -> id -> path
  std::size_t preprocess_runs = 0;
  std::size_t failed = 0;    // preprocess failures, excluded
  std::size_t excluded = 0;  // ids missing from some variant
  std::vector<std::string> warnings;

  // Throws ValidationError for an unknown variant.
  std::vector<Problem> problems(const std::string& variant) const;

  json manifest() const;
  static Benchmark from_manifest(const json& document);
};

// Throws ValidationError when a root is missing or a variant has no files.
Benchmark ingest(const BenchmarkSpec& spec);

}  // namespace stratinv
