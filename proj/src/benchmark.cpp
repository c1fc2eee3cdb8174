#include "stratinv/benchmark.hpp"

#include <fcntl.h>
#include <fnmatch.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <set>

#include "stratinv/error.hpp"

namespace stratinv {
namespace fs = std::filesystem;
namespace {

void replace_all(std::string& s, std::string_view from, std::string_view to) {
  for (std::size_t pos = 0; (pos = s.find(from, pos)) != std::string::npos; pos += to.size()) {
    s.replace(pos, from.size(), to);
  }
}

// Runs argv with stdout optionally redirected; true on exit status 0.
bool run_command(const std::vector<std::string>& argv, const fs::path* stdout_path) {
  std::vector<char*> args;
  for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
  args.push_back(nullptr);
  const pid_t pid = fork();
  if (pid < 0) throw OrchestrationError("fork failed");
  if (pid == 0) {
    const int null_fd = open("/dev/null", O_WRONLY);
    if (null_fd >= 0) dup2(null_fd, STDERR_FILENO);
    if (stdout_path) {
      const int fd = open(stdout_path->c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
      if (fd < 0) _exit(127);
      dup2(fd, STDOUT_FILENO);
    } else if (null_fd >= 0) {
      dup2(null_fd, STDOUT_FILENO);
    }
    execvp(args[0], args.data());
    _exit(127);
  }
  int status = 0;
  while (waitpid(pid, &status, 0) < 0) {
    if (errno != EINTR) return false;
  }
  return WIFEXITED(status) && WEXITSTATUS(status) == 0;
}

std::map<std::string, fs::path> scan(const VariantSpec& v, const fs::path& cache_dir) {
  std::map<std::string, fs::path> out;
  const fs::path cache = fs::weakly_canonical(cache_dir);
  for (auto it = fs::recursive_directory_iterator(v.root); it != fs::recursive_directory_iterator();
       ++it) {
    if (it->is_directory() && fs::weakly_canonical(it->path()) == cache) {
      it.disable_recursion_pending();
      continue;
    }
    const auto& entry = *it;
    if (!entry.is_regular_file()) continue;
    const std::string rel = fs::relative(entry.path(), v.root).generic_string();
    if (fnmatch(v.glob.c_str(), rel.c_str(), 0) == 0) out.emplace(rel, entry.path());
  }
  return out;
}

}  // namespace

BenchmarkSpec BenchmarkSpec::from_json(const json& document, const fs::path& base_dir) {
  if (!document.is_object()) throw ParseError("benchmark spec must be an object");
  BenchmarkSpec spec;
  try {
    spec.name = document.value("name", "benchmark");
    spec.cache_dir = base_dir / document.value("cache_dir", ".stratinv-cache");
    const auto& variants = document.at("variants");
    if (!variants.is_object()) throw ParseError("'variants' must be an object");
    for (const auto& [id, v] : variants.items()) {
      VariantSpec vs;
      vs.root = base_dir / v.at("root").get<std::string>();
      vs.glob = v.value("glob", "*");
      if (v.contains("preprocess")) vs.preprocess = v["preprocess"].get<std::vector<std::string>>();
      spec.variants.emplace(id, std::move(vs));
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("benchmark spec: ") + e.what());
  }
  if (spec.variants.empty()) throw ValidationError("benchmark spec has no variants");
  return spec;
}

BenchmarkSpec BenchmarkSpec::from_file(const fs::path& path) {
  return from_json(parse_json_file(path), path.parent_path());
}

std::vector<Problem> Benchmark::problems(const std::string& variant) const {
  auto it = paths.find(variant);
  if (it == paths.end()) throw ValidationError("benchmark has no variant '" + variant + "'");
  std::vector<Problem> out;
  for (const auto& id : problem_ids) out.push_back(Problem{id, it->second.at(id)});
  return out;
}

json Benchmark::manifest() const {
  json variants = json::object();
  for (const auto& [v, files] : paths) {
    json m = json::object();
    for (const auto& id : problem_ids) m[id] = files.at(id).string();
    variants[v] = m;
  }
  return {{"name", name}, {"problems", problem_ids}, {"variants", variants}};
}

Benchmark Benchmark::from_manifest(const json& document) {
  Benchmark b;
  try {
    b.name = document.at("name").get<std::string>();
    b.problem_ids = document.at("problems").get<std::vector<std::string>>();
    for (const auto& [v, files] : document.at("variants").items()) {
      for (const auto& id : b.problem_ids) b.paths[v][id] = files.at(id).get<std::string>();
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("manifest: ") + e.what());
  }
  return b;
}

Benchmark ingest(const BenchmarkSpec& spec) {
  Benchmark b;
  b.name = spec.name;
  std::map<std::string, std::map<std::string, fs::path>> found;
  for (const auto& [variant, v] : spec.variants) {
    if (!fs::is_directory(v.root)) {
      throw ValidationError("variant '" + variant + "': missing root '" + v.root.string() + "'");
    }
    auto files = scan(v, spec.cache_dir);
    if (files.empty()) {
      throw ValidationError("variant '" + variant + "': no files match '" + v.glob + "'");
    }
    auto& out = found[variant];
    if (v.preprocess.empty()) {
      out = std::move(files);
      continue;
    }
    const std::string command = join(v.preprocess, std::string(1, '\0'));
    const bool to_stdout = std::none_of(v.preprocess.begin(), v.preprocess.end(),
                                        [](const auto& t) { return t.find("{output}") != std::string::npos; });
    for (const auto& [id, source] : files) {
      const std::uint64_t h = fnv1a64(read_file(source), fnv1a64(command));
      const fs::path target = spec.cache_dir / variant / hex_digits(h, 16) / id;
      if (fs::exists(target)) {
        out.emplace(id, target);
        continue;
      }
      fs::create_directories(target.parent_path());
      const fs::path tmp = target.string() + ".part";
      std::vector<std::string> argv = v.preprocess;
      for (auto& t : argv) {
        replace_all(t, "{input}", source.string());
        replace_all(t, "{output}", tmp.string());
      }
      ++b.preprocess_runs;
      const bool ok = run_command(argv, to_stdout ? &tmp : nullptr) && fs::exists(tmp);
      if (!ok) {
        fs::remove(tmp);
        ++b.failed;
        b.warnings.push_back("variant '" + variant + "': preprocessing failed for '" + id + "'");
        continue;
      }
      fs::rename(tmp, target);
      out.emplace(id, target);
    }
  }

  std::set<std::string> all;
  for (const auto& [variant, files] : found) {
    for (const auto& [id, path] : files) all.insert(id);
  }
  for (const auto& id : all) {
    const bool everywhere = std::all_of(found.begin(), found.end(),
                                        [&](const auto& kv) { return kv.second.contains(id); });
    if (everywhere) {
      b.problem_ids.push_back(id);
      continue;
    }
    ++b.excluded;
    b.warnings.push_back("problem '" + id + "' is missing from some variant");
  }
  for (auto& [variant, files] : found) {
    for (const auto& id : b.problem_ids) b.paths[variant][id] = files.at(id);
  }
  return b;
}

}  // namespace stratinv
