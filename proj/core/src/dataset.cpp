#include "ddcnn/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "ddcnn/errors.hpp"
#include "ddcnn/rng.hpp"

namespace ddcnn {

const std::array<const char*, 10> kClassNames = {
    "c0", "c1", "c2", "c3", "c4", "c5", "c6", "c7", "c8", "c9",
};

int class_index(const std::string& label) {
    if (label.size() == 2 && label[0] == 'c' && label[1] >= '0' && label[1] <= '9') {
        return label[1] - '0';
    }
    return -1;
}

std::map<std::string, std::size_t> DatasetIndex::class_counts() const {
    std::map<std::string, std::size_t> counts;
    for (const auto& row : rows) ++counts[row.label];
    return counts;
}

std::set<std::string> DatasetIndex::drivers() const {
    std::set<std::string> ids;
    for (const auto& row : rows) ids.insert(row.driver_id);
    return ids;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

std::string strip_cr(std::string s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
    return s;
}

DatasetIndex load_csv(const std::filesystem::path& csv_path,
                      const std::string& expected_header, bool driver_first) {
    std::ifstream in(csv_path);
    if (!in) throw IoError("cannot open manifest '" + csv_path.string() + "'");

    std::string line;
    if (!std::getline(in, line)) {
        throw DataError("manifest '" + csv_path.string() + "' is empty");
    }
    if (strip_cr(line) != expected_header) {
        throw DataError("manifest '" + csv_path.string() + "' line 1: expected header '" +
                        expected_header + "', got '" + strip_cr(line) + "'");
    }

    DatasetIndex index;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        line = strip_cr(line);
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        const std::size_t expected_fields = driver_first ? 3 : 2;
        if (fields.size() != expected_fields) {
            throw DataError("manifest '" + csv_path.string() + "' line " +
                            std::to_string(line_no) + ": expected " +
                            std::to_string(expected_fields) + " fields, got " +
                            std::to_string(fields.size()));
        }
        DatasetRow row;
        if (driver_first) {
            row.driver_id = fields[0];
            row.label = fields[1];
            row.image_path = row.label + "/" + fields[2];
            if (row.driver_id.empty() || fields[2].empty()) {
                throw DataError("manifest '" + csv_path.string() + "' line " +
                                std::to_string(line_no) + ": empty field");
            }
        } else {
            row.label = fields[1];
            row.image_path = fields[0];
            if (row.image_path.empty()) {
                throw DataError("manifest '" + csv_path.string() + "' line " +
                                std::to_string(line_no) + ": empty image name");
            }
        }
        if (class_index(row.label) < 0) {
            throw DataError("manifest '" + csv_path.string() + "' line " +
                            std::to_string(line_no) + ": unknown class label '" +
                            row.label + "'");
        }
        index.rows.push_back(std::move(row));
    }
    return index;
}

SplitResult assemble_split(const DatasetIndex& index,
                           const std::set<std::string>& val_drivers,
                           std::uint64_t seed) {
    SplitResult result;
    result.plan.seed = seed;
    result.plan.val_drivers = val_drivers;
    for (const auto& row : index.rows) {
        if (val_drivers.count(row.driver_id)) {
            result.val.rows.push_back(row);
        } else {
            result.plan.train_drivers.insert(row.driver_id);
            result.train.rows.push_back(row);
        }
    }
    return result;
}

} // namespace

DatasetIndex load_manifest(const std::filesystem::path& csv_path) {
    return load_csv(csv_path, "subject,classname,img", /*driver_first=*/true);
}

DatasetIndex load_labels(const std::filesystem::path& csv_path) {
    return load_csv(csv_path, "img,classname", /*driver_first=*/false);
}

SplitResult split_by_driver(const DatasetIndex& index, double val_fraction,
                            std::uint64_t seed) {
    if (val_fraction <= 0.0 || val_fraction >= 1.0) {
        throw ConfigError("val_fraction must lie in (0,1), got " +
                          std::to_string(val_fraction));
    }

    std::vector<std::string> drivers;
    std::map<std::string, std::size_t> images_per_driver;
    for (const auto& row : index.rows) {
        auto [it, inserted] = images_per_driver.emplace(row.driver_id, 0);
        if (inserted) drivers.push_back(row.driver_id);  // first-appearance order
        ++it->second;
    }
    if (drivers.size() < 2) {
        throw DataError("driver-disjoint split needs at least 2 distinct drivers, got " +
                        std::to_string(drivers.size()));
    }

    Rng rng(seed);
    rng.shuffle(drivers.begin(), drivers.end());

    const double total = static_cast<double>(index.rows.size());
    std::set<std::string> val_drivers;
    std::size_t val_images = 0;
    for (const auto& driver : drivers) {
        if (static_cast<double>(val_images) / total >= val_fraction) break;
        if (val_drivers.size() + 1 == drivers.size()) break;  // keep train non-empty
        val_drivers.insert(driver);
        val_images += images_per_driver[driver];
    }
    return assemble_split(index, val_drivers, seed);
}

SplitResult split_random_by_image(const DatasetIndex& index, double val_fraction,
                                  std::uint64_t seed) {
    if (val_fraction <= 0.0 || val_fraction >= 1.0) {
        throw ConfigError("val_fraction must lie in (0,1), got " +
                          std::to_string(val_fraction));
    }
    if (index.empty()) throw DataError("cannot split an empty index");

    std::vector<std::size_t> order(index.rows.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(seed);
    rng.shuffle(order.begin(), order.end());

    const auto val_count = std::max<std::size_t>(
        1, static_cast<std::size_t>(val_fraction * static_cast<double>(order.size())));
    std::vector<bool> in_val(order.size(), false);
    for (std::size_t i = 0; i < val_count && i < order.size(); ++i) {
        in_val[order[i]] = true;
    }

    SplitResult result;
    result.plan.seed = seed;
    for (std::size_t i = 0; i < index.rows.size(); ++i) {
        const auto& row = index.rows[i];
        if (in_val[i]) {
            result.val.rows.push_back(row);
            result.plan.val_drivers.insert(row.driver_id);
        } else {
            result.train.rows.push_back(row);
            result.plan.train_drivers.insert(row.driver_id);
        }
    }
    return result;
}

} // namespace ddcnn
