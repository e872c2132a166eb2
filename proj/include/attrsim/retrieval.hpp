#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "attrsim/config.hpp"
#include "attrsim/dataset.hpp"
#include "attrsim/image_cache.hpp"
#include "attrsim/model.hpp"

namespace attrsim {

// One gallery image inside one attribute's embedding space. value is the
// image's label under that attribute, -1 when unlabeled.
struct IndexEntry {
    int image_id = -1;
    int value = -1;
    Role role = Role::None;
    std::vector<double> f_g;
    std::vector<double> f_l;
};

struct AttributeEntries {
    int attribute_id = -1;
    std::string name;
    std::vector<IndexEntry> entries; // ascending image id
};

struct EmbeddingIndex {
    int c_o = 0;
    Split split = Split::Val;
    std::vector<AttributeEntries> attributes; // ascending attribute id

    const AttributeEntries& attribute(int attribute_id) const; // DataError
    const IndexEntry* find(int attribute_id, int image_id) const;
    void validate() const; // vector lengths, finiteness, id ordering
};

// Embeds every split image under every attribute: global branch, localize,
// local branch. Runs off the tape.
EmbeddingIndex build_index(const DatasetManifest& manifest, ImageCache& images,
                           const Model& model, Split split);

void save_index(const EmbeddingIndex& index, const std::string& path);
EmbeddingIndex load_index(const std::string& path);

// Same ids, values, and roles, but embeddings replaced with seeded uniform
// noise in [-1,1]. The floor any trained model has to beat.
EmbeddingIndex randomized_like(const EmbeddingIndex& index, std::uint64_t seed);

// lambda * cos(f_g, f_g') + (1 - lambda) * cos(f_l, f_l').
double fused_similarity(const IndexEntry& a, const IndexEntry& b, double lambda);

// Sum of fused similarities over the given attributes. Empty list is a
// ContractError, an unindexed (attribute, image) pair a DataError.
double multi_attribute_similarity(const EmbeddingIndex& index, int image_a, int image_b,
                                  const std::vector<int>& attribute_ids, double lambda);

struct RankedItem {
    int image_id;
    double score;
};

using RankedList = std::vector<RankedItem>;

struct RetrieveOptions {
    int k = 10;
    double lambda = 0.6;
    bool labeled_only = false; // drop entries without a value for the attribute
};

// Top-k by fused similarity, descending, ties broken by ascending image id.
// The query itself and query-role entries never appear in the pool.
RankedList retrieve(const EmbeddingIndex& index, int query_id, int attribute_id,
                    const RetrieveOptions& opt);

// relevance in rank order; total_relevant counts all relevant gallery items,
// ranked or not.
double average_precision(const std::vector<char>& relevance, int total_relevant);

struct QueryRelevance {
    std::vector<char> relevance;
    int total_relevant = 0;
};

double mean_average_precision(const std::vector<QueryRelevance>& queries);
double recall_at_k(const std::vector<QueryRelevance>& queries, int k,
                   RecallVariant variant = RecallVariant::AtLeastOne);

// Reorders the first top_n items by multi-attribute fused similarity to the
// query (stable), leaves the suffix untouched.
RankedList rerank(const RankedList& initial, const EmbeddingIndex& index, int query_id,
                  const std::vector<int>& attribute_ids, double lambda, int top_n);

struct AttributeEval {
    int attribute_id = -1;
    std::string name;
    double map = 0.0;
    double recall = 0.0;
    int queries = 0;
    int skipped = 0; // queries with no relevant candidate
};

struct EvalReport {
    std::vector<AttributeEval> per_attribute;
    double map_attribute_mean = 0.0;
    double map_pooled = 0.0;
    double recall = 0.0;
    int queries = 0;
    int skipped = 0;
    int recall_k = 0;
};

struct EvalOptions {
    double lambda = 0.6;
    int recall_k = 100;
    RecallVariant recall_variant = RecallVariant::AtLeastOne;
};

// Query-role entries against candidate-role entries, relevance = same value
// under the attribute. Unlabeled candidates leave the pool; queries with no
// relevant candidate are skipped and counted.
EvalReport evaluate_index(const EmbeddingIndex& index, const EvalOptions& opt);

void write_report(const EvalReport& report, std::ostream& out);

} // namespace attrsim
