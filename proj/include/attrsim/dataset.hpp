#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace attrsim {

enum class Split { Train, Val, Test };
enum class Role { None, Query, Candidate };

std::string to_string(Split s);
std::string to_string(Role r);

struct AttributeDef {
    int id = 0;
    std::string name;
    int value_count = 0;
};

struct ImageRecord {
    int id = -1;
    std::string path; // relative to the dataset root
    Split split = Split::Train;
    Role role = Role::None;
    std::map<int, int> labels; // attribute id -> value id, partial

    bool has_label(int attribute_id) const { return labels.count(attribute_id) != 0; }
    // -1 when the image carries no label for the attribute.
    int label(int attribute_id) const;
};

// Text manifest, one declaration per line:
//   attribute <id> <name> <value_count>
//   image <id> <relpath> <split> <role> <attr>:<value> ...
// Blank lines and #-comments are skipped. Attribute ids are dense 0..n-1 so
// they can index the embedding table directly.
struct DatasetManifest {
    std::vector<AttributeDef> attributes;
    std::vector<ImageRecord> records;

    int attribute_count() const { return static_cast<int>(attributes.size()); }
    const AttributeDef& attribute(int id) const;
    const ImageRecord* find(int image_id) const;
    const ImageRecord& record(int image_id) const; // DataError when absent
    std::vector<const ImageRecord*> split_records(Split s) const;

    // DataError on duplicate ids, out-of-range labels, sparse attribute ids,
    // or role tags inconsistent with the split.
    void validate() const;
};

DatasetManifest parse_manifest(std::istream& in);
DatasetManifest load_manifest(const std::string& path);
void write_manifest(const DatasetManifest& m, std::ostream& out);
void save_manifest(const DatasetManifest& m, const std::string& path);

} // namespace attrsim
