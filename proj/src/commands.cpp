#include "attrsim/commands.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "attrsim/attention.hpp"
#include "attrsim/checkpoint.hpp"
#include "attrsim/config.hpp"
#include "attrsim/errors.hpp"
#include "attrsim/image_cache.hpp"
#include "attrsim/image_io.hpp"
#include "attrsim/localization.hpp"
#include "attrsim/ops.hpp"
#include "attrsim/oracles.hpp"
#include "attrsim/retrieval.hpp"
#include "attrsim/rng.hpp"
#include "attrsim/synthetic.hpp"
#include "attrsim/trainer.hpp"

namespace attrsim {

namespace {

namespace fs = std::filesystem;

Split parse_split_flag(const std::string& s) {
    if (s == "val") {
        return Split::Val;
    }
    if (s == "test") {
        return Split::Test;
    }
    throw ConfigError("split must be val or test, got '" + s + "'");
}

std::vector<int> parse_id_list(const std::string& s) {
    std::vector<int> out;
    std::istringstream in(s);
    std::string tok;
    while (std::getline(in, tok, ',')) {
        if (tok.empty()) {
            throw ConfigError("empty id in list '" + s + "'");
        }
        std::size_t used = 0;
        int v = 0;
        try {
            v = std::stoi(tok, &used);
        } catch (const std::exception&) {
            throw ConfigError("'" + tok + "' is not an integer id");
        }
        if (used != tok.size()) {
            throw ConfigError("'" + tok + "' is not an integer id");
        }
        out.push_back(v);
    }
    if (out.empty()) {
        throw ConfigError("expected at least one id in '" + s + "'");
    }
    return out;
}

DatasetManifest load_data(const std::string& data_dir) {
    return load_manifest((fs::path(data_dir) / "manifest.txt").string());
}

} // namespace

std::vector<AttributeDef> parse_attribute_spec(const std::string& spec) {
    std::vector<AttributeDef> out;
    std::istringstream in(spec);
    std::string tok;
    while (std::getline(in, tok, ',')) {
        const std::size_t colon = tok.find(':');
        if (colon == std::string::npos || colon == 0 || colon + 1 == tok.size()) {
            throw ConfigError("attribute '" + tok + "' is not <name>:<count>");
        }
        AttributeDef a;
        a.id = static_cast<int>(out.size());
        a.name = tok.substr(0, colon);
        const std::string count = tok.substr(colon + 1);
        std::size_t used = 0;
        try {
            a.value_count = std::stoi(count, &used);
        } catch (const std::exception&) {
            throw ConfigError("value count '" + count + "' is not an integer");
        }
        if (used != count.size()) {
            throw ConfigError("value count '" + count + "' is not an integer");
        }
        out.push_back(std::move(a));
    }
    if (out.empty()) {
        throw ConfigError("attribute spec is empty");
    }
    return out;
}

int cmd_gen_data(const GenDataArgs& args, std::ostream& out, std::ostream& log) {
    SyntheticSpec spec;
    spec.attributes = parse_attribute_spec(args.attributes);
    spec.per_value = args.per_value;
    spec.side = args.side;
    spec.noise = args.noise;

    log << "rendering synthetic dataset into " << args.out_dir << "\n";
    DatasetManifest m = generate_synthetic_dataset(spec, args.out_dir, args.seed);

    int train = 0, val = 0, test = 0;
    for (const ImageRecord& r : m.records) {
        (r.split == Split::Train ? train : r.split == Split::Val ? val : test) += 1;
    }
    out << "images " << m.records.size() << " (train " << train << ", val " << val
        << ", test " << test << ")\n";
    out << "attributes " << m.attributes.size() << "\n";
    out << "manifest " << (fs::path(args.out_dir) / "manifest.txt").string() << "\n";
    return 0;
}

int cmd_train(const TrainArgs& args, std::ostream& out, std::ostream& log) {
    DatasetManifest manifest = load_data(args.data_dir);

    ExperimentConfig exp;
    if (!args.config_path.empty()) {
        exp = load_experiment_config(args.config_path);
    }
    if (args.seed_set) {
        exp.train.seed = args.seed;
    }

    StageSelect select;
    if (args.stage == "1") {
        select = StageSelect::Stage1;
    } else if (args.stage == "2") {
        select = StageSelect::Stage2;
    } else if (args.stage == "both") {
        select = StageSelect::Both;
    } else {
        throw ConfigError("stage must be 1, 2, or both");
    }

    Checkpoint ck;
    if (!args.resume.empty()) {
        ck = load_checkpoint(args.resume);
        if (ck.model.config.n_attributes != manifest.attribute_count()) {
            throw CompatibilityError("checkpoint attribute count does not match the dataset");
        }
    } else {
        if (select == StageSelect::Stage2) {
            throw ConfigError("stage 2 alone needs --resume with a stage-1 checkpoint");
        }
        ck.model = init_model(model_config_for(exp, manifest.attribute_count()),
                              exp.train.seed);
    }

    ImageCache images(manifest, args.data_dir,
                      ck.model.config.global_backbone.input_side);

    std::ofstream trace_file;
    if (!args.out_ckpt.empty()) {
        trace_file.open(args.out_ckpt + ".trace.csv", std::ios::trunc);
        if (!trace_file) {
            throw DataError("cannot write trace next to '" + args.out_ckpt + "'");
        }
    }
    const char* header = "epoch,L_g,L_l,L_a,joint\n";
    out << header;
    if (trace_file.is_open()) {
        trace_file << header;
    }

    TrainContext ctx{manifest, images, exp.train, exp.weights, {}, {}, {}, {}, {}, {}, {}};
    ctx.align_stop_global = exp.align_stop_global;
    ctx.eval_lambda = exp.lambda;
    ctx.recall_k = exp.recall_k;
    ctx.recall_variant = exp.recall_variant;
    ctx.checkpoint_path = args.out_ckpt;
    ctx.trace_sinks = {&out};
    if (trace_file.is_open()) {
        ctx.trace_sinks.push_back(&trace_file);
    }
    ctx.log = &log;

    TrainReport report = run_training(ck, select, ctx);
    (void)report;
    if (!args.out_ckpt.empty()) {
        save_checkpoint(ck, args.out_ckpt);
        log << "checkpoint written to " << args.out_ckpt << "\n";
    }
    return 0;
}

int cmd_embed(const EmbedArgs& args, std::ostream& out, std::ostream& log) {
    Checkpoint ck = load_checkpoint(args.ckpt);
    DatasetManifest manifest = load_data(args.data_dir);
    if (ck.model.config.n_attributes != manifest.attribute_count()) {
        throw CompatibilityError("checkpoint attribute count does not match the dataset");
    }
    const Split split = parse_split_flag(args.split);
    ImageCache images(manifest, args.data_dir,
                      ck.model.config.global_backbone.input_side);
    log << "embedding " << args.split << " split\n";
    EmbeddingIndex index = build_index(manifest, images, ck.model, split);
    save_index(index, args.out_index);
    std::size_t entries = 0;
    for (const AttributeEntries& a : index.attributes) {
        entries += a.entries.size();
    }
    out << "index " << args.out_index << ": " << entries << " entries over "
        << index.attributes.size() << " attributes\n";
    return 0;
}

int cmd_retrieve(const RetrieveArgs& args, std::ostream& out, std::ostream& log) {
    (void)log;
    EmbeddingIndex index = load_index(args.index);
    RetrieveOptions opt;
    opt.k = args.k;
    opt.lambda = args.lambda;
    opt.labeled_only = true;
    RankedList ranked = retrieve(index, args.query, args.attribute, opt);
    out << "query " << args.query << " attribute " << args.attribute << "\n";
    out << std::fixed << std::setprecision(6);
    int rank = 1;
    for (const RankedItem& item : ranked) {
        const IndexEntry* e = index.find(args.attribute, item.image_id);
        out << rank++ << ' ' << item.image_id << ' ' << item.score << " value "
            << (e != nullptr ? e->value : -1) << "\n";
    }
    return 0;
}

int cmd_eval(const EvalArgs& args, std::ostream& out, std::ostream& log) {
    EmbeddingIndex index = load_index(args.index);
    const Split split = parse_split_flag(args.split);
    if (index.split != split) {
        throw ConfigError("index was built from the " + to_string(index.split) +
                          " split, not " + args.split);
    }
    log << "scoring " << args.split << " split\n";
    EvalOptions opt;
    opt.lambda = args.lambda;
    opt.recall_k = args.k;
    EvalReport report = evaluate_index(index, opt);
    write_report(report, out);
    return 0;
}

int cmd_rerank(const RerankArgs& args, std::ostream& out, std::ostream& log) {
    (void)log;
    EmbeddingIndex index = load_index(args.index);
    const std::vector<int> attrs = parse_id_list(args.attributes);

    std::ifstream in(args.baseline);
    if (!in) {
        throw DataError("cannot open rank file '" + args.baseline + "'");
    }
    int query_id = -1;
    bool have_query = false;
    RankedList initial;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream toks(line);
        std::string first;
        if (!(toks >> first) || first[0] == '#') {
            continue;
        }
        if (first == "query") {
            if (have_query || !(toks >> query_id)) {
                throw FormatError("rank file line " + std::to_string(line_no) +
                                  ": bad query declaration");
            }
            have_query = true;
            continue;
        }
        try {
            std::size_t used = 0;
            const int id = std::stoi(first, &used);
            if (used != first.size()) {
                throw std::invalid_argument(first);
            }
            double score = 0.0;
            toks >> score; // optional baseline score, kept for the suffix
            initial.push_back({id, score});
        } catch (const std::invalid_argument&) {
            throw FormatError("rank file line " + std::to_string(line_no) +
                              ": expected an image id");
        }
    }
    if (!have_query) {
        throw FormatError("rank file declares no query");
    }

    RankedList reordered = rerank(initial, index, query_id, attrs, 0.6, args.top_n);
    out << "query " << query_id << "\n";
    out << std::fixed << std::setprecision(6);
    int rank = 1;
    for (const RankedItem& item : reordered) {
        out << rank++ << ' ' << item.image_id << ' ' << item.score << "\n";
    }
    return 0;
}

int cmd_attention(const AttentionArgs& args, std::ostream& out, std::ostream& log) {
    Checkpoint ck = load_checkpoint(args.ckpt);
    DatasetManifest manifest = load_data(args.data_dir);
    ImageCache images(manifest, args.data_dir,
                      ck.model.config.global_backbone.input_side);
    if (args.attribute < 0 || args.attribute >= ck.model.config.n_attributes) {
        throw ConfigError("attribute id out of range");
    }
    const Tensor& img = images.image(args.image);
    BranchOutputs g = branch_forward(img, args.attribute, ck.model.global_branch,
                                     ck.model.table);
    LocalizeResult loc = localize(img, g.alpha_spatial, ck.model.config.localization);

    fs::create_directories(args.out_dir);
    const fs::path dir(args.out_dir);
    save_image(img, (dir / "input.ppm").string());
    save_attention_map(g.alpha_spatial, (dir / "alpha.pgm").string());
    save_attention_map(loc.upsampled, (dir / "upsampled.pgm").string());
    Tensor binary = Tensor::zeros({loc.binary.rows, loc.binary.cols});
    {
        auto v = binary.mutable_data();
        for (std::size_t i = 0; i < loc.binary.values.size(); ++i) {
            v[i] = loc.binary.values[i];
        }
    }
    save_attention_map(binary, (dir / "binary.pgm").string());
    save_image(loc.crop, (dir / "crop.ppm").string());

    // Input with the box burned in, for eyeballing the localization.
    Tensor boxed = Tensor::zeros(img.shape());
    std::copy(img.data().begin(), img.data().end(), boxed.mutable_data().begin());
    {
        auto v = boxed.mutable_data();
        const int side = img.extent(1);
        const std::size_t plane = static_cast<std::size_t>(side) * side;
        auto paint = [&](int r, int c) {
            const std::size_t px = static_cast<std::size_t>(r) * side + c;
            v[px] = 1.0;
            v[plane + px] = 0.0;
            v[2 * plane + px] = 0.0;
        };
        for (int c = loc.roi.col0; c <= loc.roi.col1; ++c) {
            paint(loc.roi.row0, c);
            paint(loc.roi.row1, c);
        }
        for (int r = loc.roi.row0; r <= loc.roi.row1; ++r) {
            paint(r, loc.roi.col0);
            paint(r, loc.roi.col1);
        }
    }
    save_image(boxed, (dir / "boxed.ppm").string());

    out << "image " << args.image << " attribute " << args.attribute << "\n";
    out << "roi rows " << loc.roi.row0 << ".." << loc.roi.row1 << " cols "
        << loc.roi.col0 << ".." << loc.roi.col1 << "\n";
    out << "wrote input.ppm alpha.pgm upsampled.pgm binary.pgm crop.ppm boxed.ppm in "
        << args.out_dir << "\n";
    log << "done\n";
    return 0;
}

int cmd_selftest(std::ostream& out, std::ostream& log) {
    bool all_ok = true;
    auto report = [&](const char* name, bool ok) {
        out << "selftest " << name << ": " << (ok ? "PASS" : "FAIL") << "\n";
        all_ok = all_ok && ok;
    };

    // Gradients of a small two-branch model against finite differences.
    {
        log << "checking gradients\n";
        ModelConfig mc;
        mc.n_attributes = 2;
        mc.dims = EmbedDims{6, 4, 5, 5, 4, 2};
        mc.global_backbone.input_side = 8;
        mc.global_backbone.in_channels = 2;
        mc.global_backbone.blocks = {{6, 3, 2}};
        mc.local_backbone = mc.global_backbone;
        mc.localization.local_input_side = 8;
        mc.localization.min_side = 2;
        Model m = init_model(mc, 7);

        Rng rng(99);
        Tensor img = Tensor::zeros({2, 8, 8});
        for (double& v : img.mutable_data()) {
            v = 0.1 + 0.8 * rng.uniform();
        }
        Tensor probe = Tensor::zeros({4});
        for (double& v : probe.mutable_data()) {
            v = 2.0 * rng.uniform() - 1.0;
        }
        auto forward = [&]() {
            return sum_all(mul(branch_forward(img, 1, m.global_branch, m.table).embedding,
                               probe));
        };
        GradCheckResult r = check_gradients(m.global_parameters(), forward);
        report("gradients", r.max_rel_err < 1e-5);
    }

    // Connected components against the flood-fill oracle.
    {
        log << "checking localization oracles\n";
        Rng rng(1234);
        bool ok = true;
        for (int it = 0; it < 50 && ok; ++it) {
            const int rows = 1 + rng.below(12);
            const int cols = 1 + rng.below(12);
            const int conn = rng.below(2) == 0 ? 4 : 8;
            BinaryMap map;
            map.rows = rows;
            map.cols = cols;
            map.values.resize(static_cast<std::size_t>(rows) * cols);
            std::vector<unsigned char> grid(map.values.size());
            for (std::size_t i = 0; i < map.values.size(); ++i) {
                map.values[i] = rng.uniform() < 0.4 ? 1 : 0;
                grid[i] = map.values[i];
            }
            const auto regions = connected_components(map, conn);
            const auto labels = floodfill_labels(grid, rows, cols, conn);
            int labeled = 0;
            for (int l : labels) {
                labeled += l >= 0 ? 1 : 0;
            }
            int in_regions = 0;
            for (const Region& reg : regions) {
                in_regions += reg.area();
                int want = -1;
                for (const Pixel& p : reg.pixels) {
                    const int l = labels[static_cast<std::size_t>(p.row) * cols + p.col];
                    if (want == -1) {
                        want = l;
                    }
                    ok = ok && l == want;
                }
            }
            ok = ok && labeled == in_regions;
        }
        report("localization", ok);
    }

    // Average precision against the direct formula.
    {
        log << "checking metric oracles\n";
        Rng rng(555);
        bool ok = true;
        for (int it = 0; it < 50 && ok; ++it) {
            const int n = 1 + rng.below(8);
            std::vector<char> rel(static_cast<std::size_t>(n));
            std::vector<bool> rel_bool(static_cast<std::size_t>(n));
            int r = 0;
            for (int i = 0; i < n; ++i) {
                rel[static_cast<std::size_t>(i)] = rng.uniform() < 0.5 ? 1 : 0;
                rel_bool[static_cast<std::size_t>(i)] = rel[static_cast<std::size_t>(i)] != 0;
                r += rel[static_cast<std::size_t>(i)];
            }
            const int total = r + rng.below(3);
            if (total == 0) {
                continue;
            }
            const double got = average_precision(rel, total);
            const double want = reference_average_precision(rel_bool, total);
            ok = ok && std::abs(got - want) < 1e-12;
        }
        report("metrics", ok);
    }

    // First Adam step lands exactly where the closed form says.
    {
        log << "checking optimizer\n";
        Tensor w = Tensor::from_data({2}, {1.0, -2.0});
        w.set_requires_grad(true);
        {
            Tape tape;
            Tensor loss = sum_all(mul(w, w));
            tape.backward(loss);
        }
        AdamConfig cfg;
        AdamState adam(cfg);
        adam.step({{"w", w}});
        const double g0 = 2.0, g1 = -4.0;
        auto expected = [&](double p, double g) {
            const double rate = cfg.lr * std::sqrt(1.0 - cfg.beta2) / (1.0 - cfg.beta1);
            const double m = (1.0 - cfg.beta1) * g;
            const double v = (1.0 - cfg.beta2) * g * g;
            return p - rate * m / (std::sqrt(v) + cfg.eps);
        };
        const bool ok = std::abs(w.data()[0] - expected(1.0, g0)) < 1e-15 &&
                        std::abs(w.data()[1] - expected(-2.0, g1)) < 1e-15;
        report("optimizer", ok);
    }

    out << (all_ok ? "selftest overall: PASS" : "selftest overall: FAIL") << "\n";
    return all_ok ? 0 : 1;
}

} // namespace attrsim
