#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "attrsim/dataset.hpp"

namespace attrsim {

// Library-level command implementations. The CLI binary only parses flags
// into these structs; tests drive the same entry points in process. Every
// command writes results to `out` and progress to `log`, returning 0 on
// success; failures surface as exceptions.

struct GenDataArgs {
    std::string out_dir;
    std::string attributes; // "name:count,name:count"
    int per_value = 8;
    int side = 64;
    double noise = 0.05;
    std::uint64_t seed = 1;
};
int cmd_gen_data(const GenDataArgs& args, std::ostream& out, std::ostream& log);

std::vector<AttributeDef> parse_attribute_spec(const std::string& spec);

struct TrainArgs {
    std::string data_dir;
    std::string config_path; // optional; defaults apply when empty
    std::string stage = "both";
    std::string out_ckpt;
    std::string resume; // optional checkpoint to continue from
    std::uint64_t seed = 0;
    bool seed_set = false; // CLI seed overrides the config file
};
int cmd_train(const TrainArgs& args, std::ostream& out, std::ostream& log);

struct EmbedArgs {
    std::string data_dir;
    std::string ckpt;
    std::string split = "val";
    std::string out_index;
};
int cmd_embed(const EmbedArgs& args, std::ostream& out, std::ostream& log);

struct RetrieveArgs {
    std::string index;
    int query = -1;
    int attribute = -1;
    int k = 10;
    double lambda = 0.6;
};
int cmd_retrieve(const RetrieveArgs& args, std::ostream& out, std::ostream& log);

struct EvalArgs {
    std::string index;
    std::string split = "test";
    int k = 100;
    double lambda = 0.6;
};
int cmd_eval(const EvalArgs& args, std::ostream& out, std::ostream& log);

struct RerankArgs {
    std::string index;
    std::string baseline; // rank file: "query <id>" then one image id per line
    std::string attributes; // comma-separated ids
    int top_n = 10;
};
int cmd_rerank(const RerankArgs& args, std::ostream& out, std::ostream& log);

struct AttentionArgs {
    std::string data_dir;
    std::string ckpt;
    int image = -1;
    int attribute = -1;
    std::string out_dir;
};
int cmd_attention(const AttentionArgs& args, std::ostream& out, std::ostream& log);

int cmd_selftest(std::ostream& out, std::ostream& log);

} // namespace attrsim
