#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace fdk {

enum class Split { kTrain, kValidation, kTest, kUnassigned };

const char* split_name(Split s);

struct ImageRecord {
  std::string path;
  std::string class_label;
  Split split = Split::kUnassigned;
  std::uint64_t content_hash = 0;
};

// Class taxonomy plus per-image records. Persisted as line-delimited text:
// header "fdk_dataset 1 <seed> <ratio> <class,csv>", then one record per
// line: "<path> <label> <split> <hash16>". Paths and labels are
// whitespace-free tokens.
struct DatasetManifest {
  std::vector<std::string> classes;  // sorted, non-empty
  std::vector<ImageRecord> records;
  std::uint64_t seed = 0;
  double ratio = 0.0;  // train fraction used by the last split, 0 before

  int class_index(const std::string& label) const;  // InvalidArgument if unknown
};

// Scans <root>/<class>/<image>; classes are the sorted subdirectory names,
// records enumerate files in lexicographic path order with UNASSIGNED splits.
DatasetManifest build_manifest(const std::string& root_dir);

// Stratified per-class shuffle: records of class k are permuted by the
// documented PRNG stream (seed, k) and the first floor(ratio * n_k) become
// TRAIN, the rest VALIDATION. TEST records are never reassigned.
DatasetManifest split_dataset(const DatasetManifest& m, double ratio, std::uint64_t seed);

std::string serialize_dataset_manifest(const DatasetManifest& m);
DatasetManifest parse_dataset_manifest(const std::string& text);
void save_dataset_manifest(const DatasetManifest& m, const std::string& path);
DatasetManifest load_dataset_manifest(const std::string& path);

}  // namespace fdk
