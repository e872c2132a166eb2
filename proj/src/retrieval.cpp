#include "attrsim/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "attrsim/attention.hpp"
#include "attrsim/binio.hpp"
#include "attrsim/errors.hpp"
#include "attrsim/localization.hpp"
#include "attrsim/losses.hpp"
#include "attrsim/rng.hpp"

namespace attrsim {

namespace {

constexpr char kMagic[8] = {'A', 'T', 'R', 'S', 'M', 'I', 'X', '\n'};
constexpr std::uint32_t kVersion = 1;

Role role_from_byte(std::uint8_t b) {
    switch (b) {
    case 0:
        return Role::None;
    case 1:
        return Role::Query;
    case 2:
        return Role::Candidate;
    default:
        throw FormatError("unknown role byte in index");
    }
}

std::uint8_t role_to_byte(Role r) {
    switch (r) {
    case Role::None:
        return 0;
    case Role::Query:
        return 1;
    default:
        return 2;
    }
}

Split split_from_byte(std::uint8_t b) {
    switch (b) {
    case 0:
        return Split::Train;
    case 1:
        return Split::Val;
    case 2:
        return Split::Test;
    default:
        throw FormatError("unknown split byte in index");
    }
}

std::uint8_t split_to_byte(Split s) {
    switch (s) {
    case Split::Train:
        return 0;
    case Split::Val:
        return 1;
    default:
        return 2;
    }
}

} // namespace

const AttributeEntries& EmbeddingIndex::attribute(int attribute_id) const {
    for (const AttributeEntries& a : attributes) {
        if (a.attribute_id == attribute_id) {
            return a;
        }
    }
    throw DataError("index holds no attribute " + std::to_string(attribute_id));
}

const IndexEntry* EmbeddingIndex::find(int attribute_id, int image_id) const {
    const AttributeEntries& a = attribute(attribute_id);
    auto it = std::lower_bound(a.entries.begin(), a.entries.end(), image_id,
                               [](const IndexEntry& e, int id) { return e.image_id < id; });
    if (it == a.entries.end() || it->image_id != image_id) {
        return nullptr;
    }
    return &*it;
}

void EmbeddingIndex::validate() const {
    if (c_o < 1) {
        throw DataError("index embedding width must be positive");
    }
    int prev_attr = -1;
    for (const AttributeEntries& a : attributes) {
        if (a.attribute_id <= prev_attr) {
            throw DataError("index attributes out of order");
        }
        prev_attr = a.attribute_id;
        int prev_id = -1;
        for (const IndexEntry& e : a.entries) {
            if (e.image_id <= prev_id) {
                throw DataError("index entries out of order for attribute " +
                                std::to_string(a.attribute_id));
            }
            prev_id = e.image_id;
            if (e.f_g.size() != static_cast<std::size_t>(c_o) ||
                e.f_l.size() != static_cast<std::size_t>(c_o)) {
                throw DataError("index vector width mismatch for image " +
                                std::to_string(e.image_id));
            }
            for (double v : e.f_g) {
                if (!std::isfinite(v)) {
                    throw DataError("non-finite global embedding for image " +
                                    std::to_string(e.image_id));
                }
            }
            for (double v : e.f_l) {
                if (!std::isfinite(v)) {
                    throw DataError("non-finite local embedding for image " +
                                    std::to_string(e.image_id));
                }
            }
        }
    }
}

EmbeddingIndex build_index(const DatasetManifest& manifest, ImageCache& images,
                           const Model& model, Split split) {
    model.validate();
    std::vector<const ImageRecord*> records = manifest.split_records(split);
    std::sort(records.begin(), records.end(),
              [](const ImageRecord* a, const ImageRecord* b) { return a->id < b->id; });

    EmbeddingIndex index;
    index.c_o = model.config.dims.c_o;
    index.split = split;
    for (const AttributeDef& attr : manifest.attributes) {
        AttributeEntries bucket;
        bucket.attribute_id = attr.id;
        bucket.name = attr.name;
        for (const ImageRecord* rec : records) {
            const Tensor& img = images.image(rec->id);
            BranchOutputs g = branch_forward(img, attr.id, model.global_branch, model.table);
            LocalizeResult loc = localize(img, g.alpha_spatial, model.config.localization);
            BranchOutputs l = branch_forward(loc.crop, attr.id, model.local_branch, model.table);

            IndexEntry e;
            e.image_id = rec->id;
            e.value = rec->label(attr.id);
            e.role = rec->role;
            e.f_g.assign(g.embedding.data().begin(), g.embedding.data().end());
            e.f_l.assign(l.embedding.data().begin(), l.embedding.data().end());
            bucket.entries.push_back(std::move(e));
        }
        index.attributes.push_back(std::move(bucket));
    }
    index.validate();
    return index;
}

void save_index(const EmbeddingIndex& index, const std::string& path) {
    index.validate();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw DataError("cannot write index '" + path + "'");
    }
    out.write(kMagic, 8);
    write_u32(out, kVersion);
    write_u8(out, split_to_byte(index.split));
    write_u32(out, static_cast<std::uint32_t>(index.c_o));
    write_u32(out, static_cast<std::uint32_t>(index.attributes.size()));
    for (const AttributeEntries& a : index.attributes) {
        write_i32(out, a.attribute_id);
        write_string(out, a.name);
        write_u64(out, a.entries.size());
        for (const IndexEntry& e : a.entries) {
            write_i32(out, e.image_id);
            write_i32(out, e.value);
            write_u8(out, role_to_byte(e.role));
            write_f64_block(out, e.f_g.data(), e.f_g.size());
            write_f64_block(out, e.f_l.data(), e.f_l.size());
        }
    }
    if (!out.flush()) {
        throw DataError("short write to index '" + path + "'");
    }
}

EmbeddingIndex load_index(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open index '" + path + "'");
    }
    char magic[8];
    if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) {
        throw FormatError("'" + path + "' is not an embedding index");
    }
    const std::uint32_t version = read_u32(in, "index version");
    if (version != kVersion) {
        throw CompatibilityError("index version " + std::to_string(version) +
                                 " is not supported");
    }
    EmbeddingIndex index;
    index.split = split_from_byte(read_u8(in, "split"));
    index.c_o = static_cast<int>(read_u32(in, "embedding width"));
    const std::uint32_t n_attrs = read_u32(in, "attribute count");
    for (std::uint32_t i = 0; i < n_attrs; ++i) {
        AttributeEntries a;
        a.attribute_id = read_i32(in, "attribute id");
        a.name = read_string(in, "attribute name");
        const std::uint64_t n = read_u64(in, "entry count");
        for (std::uint64_t j = 0; j < n; ++j) {
            IndexEntry e;
            e.image_id = read_i32(in, "image id");
            e.value = read_i32(in, "value");
            e.role = role_from_byte(read_u8(in, "role"));
            e.f_g = read_f64_block(in, static_cast<std::size_t>(index.c_o), "global vector");
            e.f_l = read_f64_block(in, static_cast<std::size_t>(index.c_o), "local vector");
            a.entries.push_back(std::move(e));
        }
        index.attributes.push_back(std::move(a));
    }
    index.validate();
    return index;
}

EmbeddingIndex randomized_like(const EmbeddingIndex& index, std::uint64_t seed) {
    EmbeddingIndex out = index;
    Rng rng(seed);
    for (AttributeEntries& a : out.attributes) {
        for (IndexEntry& e : a.entries) {
            for (double& v : e.f_g) {
                v = 2.0 * rng.uniform() - 1.0;
            }
            for (double& v : e.f_l) {
                v = 2.0 * rng.uniform() - 1.0;
            }
        }
    }
    return out;
}

double fused_similarity(const IndexEntry& a, const IndexEntry& b, double lambda) {
    const double s_g = cosine_value(a.f_g, b.f_g);
    const double s_l = cosine_value(a.f_l, b.f_l);
    return lambda * s_g + (1.0 - lambda) * s_l;
}

double multi_attribute_similarity(const EmbeddingIndex& index, int image_a, int image_b,
                                  const std::vector<int>& attribute_ids, double lambda) {
    if (attribute_ids.empty()) {
        throw ContractError("multi-attribute similarity needs at least one attribute");
    }
    double total = 0.0;
    for (int attr : attribute_ids) {
        const IndexEntry* ea = index.find(attr, image_a);
        const IndexEntry* eb = index.find(attr, image_b);
        if (ea == nullptr || eb == nullptr) {
            std::ostringstream msg;
            msg << "image " << (ea == nullptr ? image_a : image_b)
                << " is not indexed under attribute " << attr;
            throw DataError(msg.str());
        }
        total += fused_similarity(*ea, *eb, lambda);
    }
    return total;
}

RankedList retrieve(const EmbeddingIndex& index, int query_id, int attribute_id,
                    const RetrieveOptions& opt) {
    if (opt.k < 1) {
        throw ContractError("retrieve needs k >= 1");
    }
    const AttributeEntries& bucket = index.attribute(attribute_id);
    const IndexEntry* query = index.find(attribute_id, query_id);
    if (query == nullptr) {
        throw DataError("query image " + std::to_string(query_id) +
                        " is not indexed under attribute " + std::to_string(attribute_id));
    }
    RankedList ranked;
    for (const IndexEntry& e : bucket.entries) {
        if (e.image_id == query_id || e.role == Role::Query) {
            continue;
        }
        if (opt.labeled_only && e.value < 0) {
            continue;
        }
        ranked.push_back({e.image_id, fused_similarity(*query, e, opt.lambda)});
    }
    std::sort(ranked.begin(), ranked.end(), [](const RankedItem& a, const RankedItem& b) {
        if (a.score != b.score) {
            return a.score > b.score;
        }
        return a.image_id < b.image_id;
    });
    if (ranked.size() > static_cast<std::size_t>(opt.k)) {
        ranked.resize(static_cast<std::size_t>(opt.k));
    }
    return ranked;
}

double average_precision(const std::vector<char>& relevance, int total_relevant) {
    if (total_relevant < 1) {
        throw ContractError("average precision needs at least one relevant item");
    }
    int seen = 0;
    double sum = 0.0;
    for (std::size_t k = 0; k < relevance.size(); ++k) {
        if (relevance[k]) {
            ++seen;
            sum += static_cast<double>(seen) / static_cast<double>(k + 1);
        }
    }
    if (seen > total_relevant) {
        throw ContractError("ranked list holds more relevant items than total_relevant");
    }
    return sum / total_relevant;
}

double mean_average_precision(const std::vector<QueryRelevance>& queries) {
    if (queries.empty()) {
        throw ContractError("MAP over zero queries");
    }
    double sum = 0.0;
    for (const QueryRelevance& q : queries) {
        sum += average_precision(q.relevance, q.total_relevant);
    }
    return sum / static_cast<double>(queries.size());
}

double recall_at_k(const std::vector<QueryRelevance>& queries, int k,
                   RecallVariant variant) {
    if (queries.empty()) {
        throw ContractError("recall over zero queries");
    }
    if (k < 1) {
        throw ContractError("recall needs k >= 1");
    }
    double sum = 0.0;
    for (const QueryRelevance& q : queries) {
        int hits = 0;
        const std::size_t upto = std::min(q.relevance.size(), static_cast<std::size_t>(k));
        for (std::size_t i = 0; i < upto; ++i) {
            hits += q.relevance[i] ? 1 : 0;
        }
        if (variant == RecallVariant::AtLeastOne) {
            sum += hits > 0 ? 1.0 : 0.0;
        } else {
            if (q.total_relevant < 1) {
                throw ContractError("fraction recall needs total_relevant >= 1");
            }
            sum += static_cast<double>(hits) / static_cast<double>(q.total_relevant);
        }
    }
    return sum / static_cast<double>(queries.size());
}

RankedList rerank(const RankedList& initial, const EmbeddingIndex& index, int query_id,
                  const std::vector<int>& attribute_ids, double lambda, int top_n) {
    if (top_n < 1) {
        throw ContractError("rerank needs top_n >= 1");
    }
    if (static_cast<std::size_t>(top_n) > initial.size()) {
        throw ContractError("top_n exceeds the ranking length");
    }
    if (attribute_ids.empty()) {
        throw ContractError("rerank needs at least one attribute");
    }
    RankedList out = initial;
    std::vector<std::pair<double, RankedItem>> head;
    head.reserve(static_cast<std::size_t>(top_n));
    for (int i = 0; i < top_n; ++i) {
        const RankedItem& item = out[static_cast<std::size_t>(i)];
        const double s =
            multi_attribute_similarity(index, query_id, item.image_id, attribute_ids, lambda);
        head.emplace_back(s, item);
    }
    std::stable_sort(head.begin(), head.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (int i = 0; i < top_n; ++i) {
        out[static_cast<std::size_t>(i)] = head[static_cast<std::size_t>(i)].second;
        out[static_cast<std::size_t>(i)].score = head[static_cast<std::size_t>(i)].first;
    }
    return out;
}

EvalReport evaluate_index(const EmbeddingIndex& index, const EvalOptions& opt) {
    EvalReport report;
    report.recall_k = opt.recall_k;
    std::vector<QueryRelevance> pooled;

    for (const AttributeEntries& bucket : index.attributes) {
        AttributeEval attr;
        attr.attribute_id = bucket.attribute_id;
        attr.name = bucket.name;
        std::vector<QueryRelevance> queries;

        for (const IndexEntry& q : bucket.entries) {
            if (q.role != Role::Query || q.value < 0) {
                continue;
            }
            int total_relevant = 0;
            for (const IndexEntry& e : bucket.entries) {
                if (e.role == Role::Candidate && e.value == q.value) {
                    ++total_relevant;
                }
            }
            if (total_relevant == 0) {
                ++attr.skipped;
                continue;
            }
            RetrieveOptions ropt;
            ropt.k = static_cast<int>(bucket.entries.size());
            ropt.lambda = opt.lambda;
            ropt.labeled_only = true;
            RankedList ranked = retrieve(index, q.image_id, bucket.attribute_id, ropt);

            QueryRelevance rel;
            rel.total_relevant = total_relevant;
            rel.relevance.reserve(ranked.size());
            for (const RankedItem& item : ranked) {
                const IndexEntry* e = index.find(bucket.attribute_id, item.image_id);
                rel.relevance.push_back(e != nullptr && e->value == q.value ? 1 : 0);
            }
            queries.push_back(std::move(rel));
        }

        attr.queries = static_cast<int>(queries.size());
        if (!queries.empty()) {
            attr.map = mean_average_precision(queries);
            attr.recall = recall_at_k(queries, opt.recall_k, opt.recall_variant);
            pooled.insert(pooled.end(), queries.begin(), queries.end());
        }
        report.queries += attr.queries;
        report.skipped += attr.skipped;
        report.per_attribute.push_back(std::move(attr));
    }

    if (pooled.empty()) {
        throw ContractError("evaluation found no scorable queries");
    }
    double attr_sum = 0.0;
    int attr_n = 0;
    for (const AttributeEval& a : report.per_attribute) {
        if (a.queries > 0) {
            attr_sum += a.map;
            ++attr_n;
        }
    }
    report.map_attribute_mean = attr_sum / attr_n;
    report.map_pooled = mean_average_precision(pooled);
    report.recall = recall_at_k(pooled, opt.recall_k, opt.recall_variant);
    return report;
}

void write_report(const EvalReport& report, std::ostream& out) {
    out << std::fixed << std::setprecision(4);
    for (const AttributeEval& a : report.per_attribute) {
        out << "attribute " << a.attribute_id << " (" << a.name << "): MAP " << a.map
            << "  Recall@" << report.recall_k << " " << a.recall << "  queries "
            << a.queries << "  skipped " << a.skipped << "\n";
    }
    out << "overall MAP (attribute mean): " << report.map_attribute_mean << "\n";
    out << "overall MAP (pooled queries): " << report.map_pooled << "\n";
    out << "overall Recall@" << report.recall_k << ": " << report.recall << "\n";
    out << "queries scored: " << report.queries << "  skipped: " << report.skipped << "\n";
}

} // namespace attrsim
