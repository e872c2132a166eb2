#include "attrsim/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "attrsim/errors.hpp"

namespace attrsim {

namespace {

[[noreturn]] void bad_line(int line_no, const std::string& why) {
    std::ostringstream msg;
    msg << "manifest line " << line_no << ": " << why;
    throw FormatError(msg.str());
}

int parse_int(const std::string& tok, int line_no, const char* what) {
    std::size_t used = 0;
    int value = 0;
    try {
        value = std::stoi(tok, &used);
    } catch (const std::exception&) {
        bad_line(line_no, std::string("expected integer ") + what + ", got '" + tok + "'");
    }
    if (used != tok.size()) {
        bad_line(line_no, std::string("trailing junk in ") + what + " '" + tok + "'");
    }
    return value;
}

Split parse_split(const std::string& tok, int line_no) {
    if (tok == "train") {
        return Split::Train;
    }
    if (tok == "val") {
        return Split::Val;
    }
    if (tok == "test") {
        return Split::Test;
    }
    bad_line(line_no, "unknown split '" + tok + "'");
}

Role parse_role(const std::string& tok, int line_no) {
    if (tok == "none") {
        return Role::None;
    }
    if (tok == "query") {
        return Role::Query;
    }
    if (tok == "candidate") {
        return Role::Candidate;
    }
    bad_line(line_no, "unknown role '" + tok + "'");
}

} // namespace

std::string to_string(Split s) {
    switch (s) {
    case Split::Train:
        return "train";
    case Split::Val:
        return "val";
    default:
        return "test";
    }
}

std::string to_string(Role r) {
    switch (r) {
    case Role::None:
        return "none";
    case Role::Query:
        return "query";
    default:
        return "candidate";
    }
}

int ImageRecord::label(int attribute_id) const {
    auto it = labels.find(attribute_id);
    return it == labels.end() ? -1 : it->second;
}

const AttributeDef& DatasetManifest::attribute(int id) const {
    if (id < 0 || id >= attribute_count()) {
        std::ostringstream msg;
        msg << "attribute id " << id << " outside [0," << attribute_count() << ")";
        throw DataError(msg.str());
    }
    return attributes[static_cast<std::size_t>(id)];
}

const ImageRecord* DatasetManifest::find(int image_id) const {
    for (const ImageRecord& r : records) {
        if (r.id == image_id) {
            return &r;
        }
    }
    return nullptr;
}

const ImageRecord& DatasetManifest::record(int image_id) const {
    const ImageRecord* r = find(image_id);
    if (r == nullptr) {
        std::ostringstream msg;
        msg << "no image with id " << image_id;
        throw DataError(msg.str());
    }
    return *r;
}

std::vector<const ImageRecord*> DatasetManifest::split_records(Split s) const {
    std::vector<const ImageRecord*> out;
    for (const ImageRecord& r : records) {
        if (r.split == s) {
            out.push_back(&r);
        }
    }
    return out;
}

void DatasetManifest::validate() const {
    for (std::size_t i = 0; i < attributes.size(); ++i) {
        const AttributeDef& a = attributes[i];
        if (a.id != static_cast<int>(i)) {
            std::ostringstream msg;
            msg << "attribute ids must be dense and ascending; position " << i
                << " holds id " << a.id;
            throw DataError(msg.str());
        }
        if (a.value_count < 1) {
            throw DataError("attribute '" + a.name + "' declares no values");
        }
        if (a.name.empty()) {
            throw DataError("attribute without a name");
        }
    }
    std::set<int> seen;
    for (const ImageRecord& r : records) {
        std::ostringstream where;
        where << "image " << r.id << ": ";
        if (r.id < 0) {
            throw DataError(where.str() + "negative id");
        }
        if (!seen.insert(r.id).second) {
            throw DataError(where.str() + "duplicate id");
        }
        if (r.path.empty()) {
            throw DataError(where.str() + "empty path");
        }
        const bool needs_role = r.split != Split::Train;
        if (needs_role && r.role == Role::None) {
            throw DataError(where.str() + "val/test records need a query or candidate role");
        }
        if (!needs_role && r.role != Role::None) {
            throw DataError(where.str() + "train records carry no role");
        }
        for (const auto& [attr, value] : r.labels) {
            if (attr < 0 || attr >= attribute_count()) {
                throw DataError(where.str() + "label references unknown attribute " +
                                std::to_string(attr));
            }
            if (value < 0 || value >= attributes[static_cast<std::size_t>(attr)].value_count) {
                std::ostringstream msg;
                msg << where.str() << "value " << value << " outside attribute "
                    << attr << "'s range";
                throw DataError(msg.str());
            }
        }
    }
}

DatasetManifest parse_manifest(std::istream& in) {
    DatasetManifest m;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream toks(line);
        std::string kind;
        if (!(toks >> kind) || kind[0] == '#') {
            continue;
        }
        if (kind == "attribute") {
            AttributeDef a;
            std::string id_tok, count_tok;
            if (!(toks >> id_tok >> a.name >> count_tok)) {
                bad_line(line_no, "attribute needs <id> <name> <value_count>");
            }
            a.id = parse_int(id_tok, line_no, "attribute id");
            a.value_count = parse_int(count_tok, line_no, "value count");
            std::string extra;
            if (toks >> extra) {
                bad_line(line_no, "unexpected token '" + extra + "'");
            }
            m.attributes.push_back(std::move(a));
        } else if (kind == "image") {
            ImageRecord r;
            std::string id_tok, split_tok, role_tok;
            if (!(toks >> id_tok >> r.path >> split_tok >> role_tok)) {
                bad_line(line_no, "image needs <id> <path> <split> <role> [a:v ...]");
            }
            r.id = parse_int(id_tok, line_no, "image id");
            r.split = parse_split(split_tok, line_no);
            r.role = parse_role(role_tok, line_no);
            std::string pair;
            while (toks >> pair) {
                const std::size_t colon = pair.find(':');
                if (colon == std::string::npos || colon == 0 || colon + 1 == pair.size()) {
                    bad_line(line_no, "label '" + pair + "' is not <attr>:<value>");
                }
                const int attr = parse_int(pair.substr(0, colon), line_no, "label attribute");
                const int value = parse_int(pair.substr(colon + 1), line_no, "label value");
                if (!r.labels.emplace(attr, value).second) {
                    bad_line(line_no, "attribute " + std::to_string(attr) + " labeled twice");
                }
            }
            m.records.push_back(std::move(r));
        } else {
            bad_line(line_no, "unknown declaration '" + kind + "'");
        }
    }
    m.validate();
    return m;
}

DatasetManifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open manifest '" + path + "'");
    }
    return parse_manifest(in);
}

void write_manifest(const DatasetManifest& m, std::ostream& out) {
    m.validate();
    for (const AttributeDef& a : m.attributes) {
        out << "attribute " << a.id << ' ' << a.name << ' ' << a.value_count << '\n';
    }
    for (const ImageRecord& r : m.records) {
        out << "image " << r.id << ' ' << r.path << ' ' << to_string(r.split) << ' '
            << to_string(r.role);
        for (const auto& [attr, value] : r.labels) {
            out << ' ' << attr << ':' << value;
        }
        out << '\n';
    }
}

void save_manifest(const DatasetManifest& m, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw DataError("cannot write manifest '" + path + "'");
    }
    write_manifest(m, out);
    if (!out.flush()) {
        throw DataError("short write to manifest '" + path + "'");
    }
}

} // namespace attrsim
