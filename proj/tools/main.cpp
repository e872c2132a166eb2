#include <CLI11.hpp>

#include <exception>
#include <iostream>

#include "attrsim/commands.hpp"

namespace {

int dispatch(const std::function<int()>& run) {
    try {
        return run();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"attribute-conditioned embedding training and retrieval"};
    app.require_subcommand(1);

    attrsim::GenDataArgs gen;
    CLI::App* gen_cmd = app.add_subcommand("gen-data", "render a synthetic labeled dataset");
    gen_cmd->add_option("--out", gen.out_dir, "output directory")->required();
    gen_cmd->add_option("--attributes", gen.attributes, "schema, e.g. color:3,pattern:3")
        ->required();
    gen_cmd->add_option("--per-value", gen.per_value, "images per attribute value");
    gen_cmd->add_option("--side", gen.side, "image side in pixels");
    gen_cmd->add_option("--noise", gen.noise, "pixel noise amplitude in [0,1]");
    gen_cmd->add_option("--seed", gen.seed, "generator seed");

    attrsim::TrainArgs train;
    CLI::App* train_cmd = app.add_subcommand("train", "run the two-stage training strategy");
    train_cmd->add_option("--data", train.data_dir, "dataset directory")->required();
    train_cmd->add_option("--config", train.config_path, "key = value config file");
    train_cmd->add_option("--stage", train.stage, "1, 2, or both");
    train_cmd->add_option("--out", train.out_ckpt, "checkpoint path")->required();
    train_cmd->add_option("--resume", train.resume, "checkpoint to continue from");
    CLI::Option* seed_opt = train_cmd->add_option("--seed", train.seed, "training seed");

    attrsim::EmbedArgs embed;
    CLI::App* embed_cmd = app.add_subcommand("embed", "embed a split into an index file");
    embed_cmd->add_option("--data", embed.data_dir, "dataset directory")->required();
    embed_cmd->add_option("--ckpt", embed.ckpt, "checkpoint path")->required();
    embed_cmd->add_option("--split", embed.split, "val or test");
    embed_cmd->add_option("--out", embed.out_index, "index path")->required();

    attrsim::RetrieveArgs retrieve;
    CLI::App* retrieve_cmd = app.add_subcommand("retrieve", "rank a gallery for one query");
    retrieve_cmd->add_option("--index", retrieve.index, "index path")->required();
    retrieve_cmd->add_option("--query", retrieve.query, "query image id")->required();
    retrieve_cmd->add_option("--attribute", retrieve.attribute, "attribute id")->required();
    retrieve_cmd->add_option("--k", retrieve.k, "result count");
    retrieve_cmd->add_option("--lambda", retrieve.lambda, "global/local fusion weight");

    attrsim::EvalArgs eval;
    CLI::App* eval_cmd = app.add_subcommand("eval", "score MAP and recall over an index");
    eval_cmd->add_option("--index", eval.index, "index path")->required();
    eval_cmd->add_option("--split", eval.split, "val or test")->required();
    eval_cmd->add_option("--k", eval.k, "recall cutoff");
    eval_cmd->add_option("--lambda", eval.lambda, "global/local fusion weight");

    attrsim::RerankArgs rerank;
    CLI::App* rerank_cmd = app.add_subcommand("rerank", "reorder a baseline ranking");
    rerank_cmd->add_option("--index", rerank.index, "index path")->required();
    rerank_cmd->add_option("--baseline", rerank.baseline, "rank file")->required();
    rerank_cmd->add_option("--attributes", rerank.attributes, "comma-separated attribute ids")
        ->required();
    rerank_cmd->add_option("--top-n", rerank.top_n, "prefix length to reorder");

    attrsim::AttentionArgs attention;
    CLI::App* attention_cmd =
        app.add_subcommand("attention", "dump attention maps and the localized crop");
    attention_cmd->add_option("--data", attention.data_dir, "dataset directory")->required();
    attention_cmd->add_option("--ckpt", attention.ckpt, "checkpoint path")->required();
    attention_cmd->add_option("--image", attention.image, "image id")->required();
    attention_cmd->add_option("--attribute", attention.attribute, "attribute id")->required();
    attention_cmd->add_option("--out", attention.out_dir, "output directory")->required();

    CLI::App* selftest_cmd =
        app.add_subcommand("selftest", "run the gradient and oracle suites");

    CLI11_PARSE(app, argc, argv);

    if (gen_cmd->parsed()) {
        return dispatch([&] { return attrsim::cmd_gen_data(gen, std::cout, std::clog); });
    }
    if (train_cmd->parsed()) {
        train.seed_set = seed_opt->count() > 0;
        return dispatch([&] { return attrsim::cmd_train(train, std::cout, std::clog); });
    }
    if (embed_cmd->parsed()) {
        return dispatch([&] { return attrsim::cmd_embed(embed, std::cout, std::clog); });
    }
    if (retrieve_cmd->parsed()) {
        return dispatch([&] { return attrsim::cmd_retrieve(retrieve, std::cout, std::clog); });
    }
    if (eval_cmd->parsed()) {
        return dispatch([&] { return attrsim::cmd_eval(eval, std::cout, std::clog); });
    }
    if (rerank_cmd->parsed()) {
        return dispatch([&] { return attrsim::cmd_rerank(rerank, std::cout, std::clog); });
    }
    if (attention_cmd->parsed()) {
        return dispatch([&] { return attrsim::cmd_attention(attention, std::cout, std::clog); });
    }
    if (selftest_cmd->parsed()) {
        return dispatch([&] { return attrsim::cmd_selftest(std::cout, std::clog); });
    }
    return 1;
}
