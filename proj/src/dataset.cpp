#include "fdk/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <sstream>

#include "fdk/error.hpp"
#include "fdk/hash.hpp"
#include "fdk/io_util.hpp"
#include "fdk/rng.hpp"

namespace fs = std::filesystem;

namespace fdk {

const char* split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kValidation: return "validation";
    case Split::kTest: return "test";
    case Split::kUnassigned: return "unassigned";
  }
  return "?";
}

namespace {

Split split_from_name(const std::string& s, const std::string& ctx) {
  if (s == "train") return Split::kTrain;
  if (s == "validation") return Split::kValidation;
  if (s == "test") return Split::kTest;
  if (s == "unassigned") return Split::kUnassigned;
  fail(Err::ParseError, ctx + ": unknown split '" + s + "'");
}

void require_token(const std::string& s, const std::string& what) {
  require(!s.empty() && s.find_first_of(", \t\r\n") == std::string::npos, Err::InvalidArgument,
          what + " '" + s + "' must be a non-empty token without spaces or commas");
}

}  // namespace

int DatasetManifest::class_index(const std::string& label) const {
  auto it = std::find(classes.begin(), classes.end(), label);
  require(it != classes.end(), Err::InvalidArgument, "label '" + label + "' not in taxonomy");
  return static_cast<int>(it - classes.begin());
}

DatasetManifest build_manifest(const std::string& root_dir) {
  require(fs::is_directory(root_dir), Err::IoError, root_dir + " is not a directory");
  DatasetManifest m;
  std::vector<fs::path> class_dirs;
  for (const auto& entry : fs::directory_iterator(root_dir))
    if (entry.is_directory()) class_dirs.push_back(entry.path());
  std::sort(class_dirs.begin(), class_dirs.end());
  require(!class_dirs.empty(), Err::NoClasses,
          root_dir + " has no class subdirectories");

  for (const fs::path& dir : class_dirs) {
    std::string label = dir.filename().string();
    require_token(label, "class name");
    m.classes.push_back(label);

    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
      if (entry.is_regular_file()) files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    require(!files.empty(), Err::EmptyClassDir,
            "class directory " + dir.string() + " contains no files");

    for (const fs::path& f : files) {
      ImageRecord r;
      r.path = f.string();
      require_token(r.path, "image path");
      r.class_label = label;
      r.split = Split::kUnassigned;
      r.content_hash = hash_file(r.path);
      m.records.push_back(std::move(r));
    }
  }
  return m;
}

DatasetManifest split_dataset(const DatasetManifest& m, double ratio, std::uint64_t seed) {
  require(ratio > 0.0 && ratio <= 1.0, Err::InvalidArgument,
          "split ratio must be in (0, 1], got " + format_float(ratio));
  require(!m.classes.empty(), Err::NoClasses, "manifest has no classes");

  DatasetManifest out = m;
  out.seed = seed;
  out.ratio = ratio;
  for (std::size_t k = 0; k < out.classes.size(); ++k) {
    // TEST records belong to external validation sets and are left alone.
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < out.records.size(); ++i)
      if (out.records[i].class_label == out.classes[k] && out.records[i].split != Split::kTest)
        members.push_back(i);
    require(!members.empty(), Err::ClassTooSmall,
            "class '" + out.classes[k] + "' has no records to split");

    Rng rng(seed, static_cast<std::uint64_t>(k));
    rng.shuffle(members);
    std::size_t n_train =
        static_cast<std::size_t>(std::floor(ratio * static_cast<double>(members.size())));
    for (std::size_t i = 0; i < members.size(); ++i)
      out.records[members[i]].split = i < n_train ? Split::kTrain : Split::kValidation;
  }
  return out;
}

std::string serialize_dataset_manifest(const DatasetManifest& m) {
  std::ostringstream os;
  os << "fdk_dataset 1 " << m.seed << " " << format_float(m.ratio);
  for (std::size_t i = 0; i < m.classes.size(); ++i) os << (i ? "," : " ") << m.classes[i];
  os << "\n";
  for (const ImageRecord& r : m.records)
    os << r.path << " " << r.class_label << " " << split_name(r.split) << " "
       << hash_to_hex16(r.content_hash) << "\n";
  return os.str();
}

DatasetManifest parse_dataset_manifest(const std::string& text) {
  DatasetManifest m;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  bool saw_header = false;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> toks = split_ws(line);
    if (toks.empty() || toks[0][0] == '#') continue;
    std::string ctx = "line " + std::to_string(lineno);
    if (!saw_header) {
      require(toks.size() == 5 && toks[0] == "fdk_dataset" && toks[1] == "1", Err::ParseError,
              ctx + ": expected 'fdk_dataset 1 <seed> <ratio> <classes>'");
      m.seed = static_cast<std::uint64_t>(parse_int(toks[2], ctx));
      m.ratio = parse_double(toks[3], ctx);
      m.classes = split_csv(toks[4]);
      for (const auto& c : m.classes)
        require(!c.empty(), Err::ParseError, ctx + ": empty class name");
      require(!m.classes.empty(), Err::NoClasses, ctx + ": class list is empty");
      saw_header = true;
      continue;
    }
    require(toks.size() == 4, Err::ParseError,
            ctx + ": expected '<path> <label> <split> <hash>'");
    ImageRecord r;
    r.path = toks[0];
    r.class_label = toks[1];
    require(std::find(m.classes.begin(), m.classes.end(), r.class_label) != m.classes.end(),
            Err::ParseError, ctx + ": label '" + r.class_label + "' not in header class list");
    r.split = split_from_name(toks[2], ctx);
    require(parse_hex16(toks[3], r.content_hash), Err::ParseError,
            ctx + ": content hash must be 16 hex characters");
    m.records.push_back(std::move(r));
  }
  require(saw_header, Err::ParseError, "empty dataset manifest");
  return m;
}

void save_dataset_manifest(const DatasetManifest& m, const std::string& path) {
  atomic_write_file(path, serialize_dataset_manifest(m));
}

DatasetManifest load_dataset_manifest(const std::string& path) {
  return parse_dataset_manifest(read_file(path));
}

}  // namespace fdk
