#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace ddcnn {

/// The ten posture classes, c0 "safe driving" through c9 "talking to
/// passenger".
extern const std::array<const char*, 10> kClassNames;

/// "c3" -> 3; -1 for anything that is not one of the ten labels.
int class_index(const std::string& label);

struct DatasetRow {
    std::string driver_id;
    std::string label;       // c0..c9
    std::string image_path;  // relative to the dataset root
};

struct DatasetIndex {
    std::vector<DatasetRow> rows;

    std::map<std::string, std::size_t> class_counts() const;
    std::set<std::string> drivers() const;
    std::size_t size() const { return rows.size(); }
    bool empty() const { return rows.empty(); }
};

/// Parses the manifest CSV (header `subject,classname,img`, one row per
/// image, images stored as `<root>/<classname>/<img>`). Malformed rows and
/// unknown labels are reported with their line number.
DatasetIndex load_manifest(const std::filesystem::path& csv_path);

/// Parses a production label file (header `img,classname`, images stored
/// directly under the root). Rows carry an empty driver id.
DatasetIndex load_labels(const std::filesystem::path& csv_path);

/// Driver-disjoint split plan: the leakage guard.
struct SplitPlan {
    std::set<std::string> train_drivers;
    std::set<std::string> val_drivers;
    std::uint64_t seed = 0;
};

struct SplitResult {
    DatasetIndex train;
    DatasetIndex val;
    SplitPlan plan;
};

/// Shuffles the distinct drivers by seed and assigns them to the validation
/// side greedily until its image share reaches val_fraction (at least one
/// driver always remains on the training side). Driver sets are disjoint
/// and the two splits partition the input rows.
SplitResult split_by_driver(const DatasetIndex& index, double val_fraction,
                            std::uint64_t seed);

/// Image-level random split that ignores drivers entirely. This is the
/// leaky strategy behind the CLI's --leaky-split flag; it exists only to
/// demonstrate how identity leakage inflates validation accuracy.
SplitResult split_random_by_image(const DatasetIndex& index, double val_fraction,
                                  std::uint64_t seed);

} // namespace ddcnn
