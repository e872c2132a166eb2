#include "attrsim/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

#include "attrsim/attention.hpp"
#include "attrsim/errors.hpp"
#include "attrsim/localization.hpp"
#include "attrsim/losses.hpp"
#include "attrsim/ops.hpp"
#include "attrsim/retrieval.hpp"
#include "attrsim/rng.hpp"

namespace attrsim {

namespace {

// Seed streams so sampling, shuffling, and any future consumers never share
// a sequence.
constexpr std::uint64_t kStreamSample = 11;
constexpr std::uint64_t kStreamShuffle = 12;

struct BatchLosses {
    double l_g = 0.0;
    double l_l = 0.0;
    double l_a = 0.0;
};

double stage1_lr(const TrainConfig& c, int epoch) {
    const int steps = (epoch - 1) / c.decay_every_s1;
    return c.lr_global_s1 * std::pow(c.decay_s1, steps);
}

double stage2_lr(double base, const TrainConfig& c, int epoch) {
    return base * std::pow(c.decay_s2, epoch - 1);
}

[[noreturn]] void abort_non_finite(int stage, int epoch, std::size_t batch, double value) {
    std::ostringstream msg;
    msg << "non-finite loss " << value << " in stage " << stage << " epoch " << epoch
        << " batch " << batch;
    throw DomainError(msg.str());
}

// Validation MAP with the given fusion weight; -1 when the split holds no
// queries so callers can fall back to last-epoch retention.
double validation_map(const Model& model, TrainContext& ctx, double lambda) {
    bool any_query = false;
    for (const ImageRecord& r : ctx.manifest.records) {
        if (r.split == Split::Val && r.role == Role::Query) {
            any_query = true;
            break;
        }
    }
    if (!any_query) {
        return -1.0;
    }
    EmbeddingIndex index = build_index(ctx.manifest, ctx.images, model, Split::Val);
    EvalOptions opt;
    opt.lambda = lambda;
    opt.recall_k = ctx.recall_k;
    opt.recall_variant = ctx.recall_variant;
    try {
        return evaluate_index(index, opt).map_attribute_mean;
    } catch (const ContractError&) {
        // Every query lacked a relevant candidate; treat as no validation
        // signal rather than aborting the run.
        return -1.0;
    }
}

void emit_trace(TrainContext& ctx, const EpochStats& s) {
    for (std::ostream* out : ctx.trace_sinks) {
        if (out != nullptr) {
            *out << s.epoch << ',' << s.l_g << ',' << s.l_l << ',' << s.l_a << ','
                 << s.joint << '\n';
            out->flush();
        }
    }
}

void log_line(TrainContext& ctx, const std::string& line) {
    if (ctx.log != nullptr) {
        *ctx.log << line << '\n';
        ctx.log->flush();
    }
}

// One minibatch of the global branch only; returns the summed loss values.
BatchLosses stage1_batch(Model& model, AdamState& adam_global,
                         const std::vector<Triplet>& batch, TrainContext& ctx) {
    Tape tape;
    Tensor l_g = Tensor::scalar(0.0);
    for (const Triplet& t : batch) {
        const Tensor fa = branch_forward(ctx.images.image(t.anchor_id), t.attribute_id,
                                         model.global_branch, model.table)
                              .embedding;
        const Tensor fp = branch_forward(ctx.images.image(t.positive_id), t.attribute_id,
                                         model.global_branch, model.table)
                              .embedding;
        const Tensor fn = branch_forward(ctx.images.image(t.negative_id), t.attribute_id,
                                         model.global_branch, model.table)
                              .embedding;
        const Tensor s_pos = cosine_similarity(fa, fp);
        const Tensor s_neg = cosine_similarity(fa, fn);
        l_g = add(l_g, triplet_loss(s_pos, s_neg, ctx.weights.margin));
    }
    BatchLosses out;
    out.l_g = l_g.item();
    tape.backward(l_g);
    adam_global.step(model.global_parameters());
    return out;
}

// One joint minibatch: global forward, localization off the tape, local
// forward on the crops, then the weighted sum of the three losses.
BatchLosses stage2_batch(Model& model, AdamState& adam_global, AdamState& adam_local,
                         const std::vector<Triplet>& batch, TrainContext& ctx) {
    Tape tape;
    Tensor l_g = Tensor::scalar(0.0);
    Tensor l_l = Tensor::scalar(0.0);
    Tensor l_a = Tensor::scalar(0.0);
    for (const Triplet& t : batch) {
        const int ids[3] = {t.anchor_id, t.positive_id, t.negative_id};
        std::vector<Tensor> f_g, f_l;
        for (int id : ids) {
            const Tensor& img = ctx.images.image(id);
            BranchOutputs g =
                branch_forward(img, t.attribute_id, model.global_branch, model.table);
            LocalizeResult loc = localize(img, g.alpha_spatial, model.config.localization);
            BranchOutputs l =
                branch_forward(loc.crop, t.attribute_id, model.local_branch, model.table);
            f_g.push_back(g.embedding);
            f_l.push_back(l.embedding);
        }
        l_g = add(l_g, triplet_loss(cosine_similarity(f_g[0], f_g[1]),
                                    cosine_similarity(f_g[0], f_g[2]), ctx.weights.margin));
        l_l = add(l_l, triplet_loss(cosine_similarity(f_l[0], f_l[1]),
                                    cosine_similarity(f_l[0], f_l[2]), ctx.weights.margin));
        std::vector<Tensor> globals = f_g;
        if (ctx.align_stop_global) {
            for (Tensor& g : globals) {
                g = detach(g);
            }
        }
        l_a = add(l_a, alignment_loss(globals, f_l));
    }
    Tensor joint = joint_loss(l_g, l_l, l_a, ctx.weights);
    BatchLosses out;
    out.l_g = l_g.item();
    out.l_l = l_l.item();
    out.l_a = l_a.item();
    tape.backward(joint);
    adam_global.step(model.global_parameters());
    adam_local.step(model.local_parameters());
    return out;
}

struct BestSnapshot {
    bool valid = false;
    double map = -1.0;
    int epoch = -1;
    Checkpoint state;
};

void consider_best(BestSnapshot& best, const Checkpoint& ck, double map, int epoch) {
    // Strict improvement keeps the earliest epoch on ties; map < 0 means no
    // validation split, where the latest epoch always wins.
    const bool better = !best.valid || (map < 0 ? true : map > best.map);
    if (!better) {
        return;
    }
    best.valid = true;
    best.map = map;
    best.epoch = epoch;
    best.state.model = clone_model(ck.model);
    best.state.cursor = ck.cursor;
    best.state.has_optimizer = ck.has_optimizer;
    best.state.adam_global = ck.adam_global; // moments are plain vectors, deep
    best.state.adam_local = ck.adam_local;
}

void restore_best(Checkpoint& ck, const BestSnapshot& best) {
    if (!best.valid) {
        return;
    }
    ck.model = clone_model(best.state.model);
    ck.cursor = best.state.cursor;
    ck.has_optimizer = best.state.has_optimizer;
    ck.adam_global = best.state.adam_global;
    ck.adam_local = best.state.adam_local;
}

// Shared epoch driver for both stages. stage is 1 or 2.
void run_stage(Checkpoint& ck, int stage, TrainContext& ctx, TrainReport& report) {
    const TrainConfig& cfg = ctx.config;
    const int epochs = stage == 1 ? cfg.epochs_stage1 : cfg.epochs_stage2;
    const int epoch_offset = stage == 1 ? 0 : cfg.epochs_stage1;
    const double val_lambda = stage == 1 ? 1.0 : ctx.eval_lambda;

    if (ck.cursor.stage < stage) {
        // Stage entry: fresh optimizer state at the stage's base rates.
        ck.cursor.stage = stage;
        ck.cursor.epoch = 0;
        ck.adam_global = AdamState(AdamConfig{
            stage == 1 ? cfg.lr_global_s1 : cfg.lr_global_s2, 0.9, 0.999, 1e-8});
        ck.adam_local = AdamState(AdamConfig{cfg.lr_local_s2, 0.9, 0.999, 1e-8});
        ck.has_optimizer = true;
    }

    BestSnapshot best;
    for (int epoch = ck.cursor.epoch + 1; epoch <= epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        const std::uint64_t pool_seed =
            derive_seed(cfg.seed, kStreamSample, static_cast<std::uint64_t>(stage) * 1000 +
                                                     static_cast<std::uint64_t>(epoch));
        std::vector<Triplet> pool =
            build_epoch_pool(ctx.manifest, cfg.triplets_per_epoch, pool_seed);

        ck.adam_global.config().lr =
            stage == 1 ? stage1_lr(cfg, epoch) : stage2_lr(cfg.lr_global_s2, cfg, epoch);
        ck.adam_local.config().lr = stage2_lr(cfg.lr_local_s2, cfg, epoch);

        BatchLosses totals;
        std::size_t batch_index = 0;
        for (std::size_t at = 0; at < pool.size(); at += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end =
                std::min(pool.size(), at + static_cast<std::size_t>(cfg.batch_size));
            std::vector<Triplet> batch(pool.begin() + static_cast<std::ptrdiff_t>(at),
                                       pool.begin() + static_cast<std::ptrdiff_t>(end));
            BatchLosses b = stage == 1
                                ? stage1_batch(ck.model, ck.adam_global, batch, ctx)
                                : stage2_batch(ck.model, ck.adam_global, ck.adam_local,
                                               batch, ctx);
            for (double v : {b.l_g, b.l_l, b.l_a}) {
                if (!std::isfinite(v)) {
                    abort_non_finite(stage, epoch, batch_index, v);
                }
            }
            totals.l_g += b.l_g;
            totals.l_l += b.l_l;
            totals.l_a += b.l_a;
            ++batch_index;
        }

        const double n = static_cast<double>(pool.size());
        EpochStats stats;
        stats.epoch = epoch_offset + epoch;
        stats.l_g = totals.l_g / n;
        stats.l_l = totals.l_l / n;
        stats.l_a = totals.l_a / n;
        stats.joint = joint_loss(stats.l_g, stats.l_l, stats.l_a, ctx.weights);
        report.epochs.push_back(stats);
        emit_trace(ctx, stats);

        ck.cursor.epoch = epoch;
        const double val_map = validation_map(ck.model, ctx, val_lambda);
        consider_best(best, ck, val_map, epoch);
        if (!ctx.checkpoint_path.empty()) {
            save_checkpoint(ck, ctx.checkpoint_path);
        }

        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::ostringstream line;
        line << "stage " << stage << " epoch " << epoch << "/" << epochs << "  loss "
             << std::fixed << std::setprecision(4) << stats.joint;
        if (val_map >= 0) {
            line << "  val MAP " << val_map;
        }
        line << "  lr " << std::scientific << std::setprecision(2)
             << ck.adam_global.config().lr << std::fixed << "  (" << std::setprecision(1)
             << secs << "s)";
        log_line(ctx, line.str());
    }

    restore_best(ck, best);
    if (best.valid) {
        if (stage == 1) {
            report.best_val_map_stage1 = best.map;
            report.best_epoch_stage1 = best.epoch;
        } else {
            report.best_val_map_stage2 = best.map;
            report.best_epoch_stage2 = best.epoch;
        }
        if (!ctx.checkpoint_path.empty()) {
            save_checkpoint(ck, ctx.checkpoint_path);
        }
        std::ostringstream line;
        line << "stage " << stage << " keeps epoch " << best.epoch;
        if (best.map >= 0) {
            line << " (val MAP " << std::fixed << std::setprecision(4) << best.map << ")";
        }
        log_line(ctx, line.str());
    }
}

} // namespace

std::vector<Triplet> sample_triplets(const DatasetManifest& manifest, int attribute_id,
                                     int count, std::uint64_t seed, Split split) {
    if (count < 0) {
        throw ContractError("triplet count must be non-negative");
    }
    manifest.attribute(attribute_id); // range check

    // Value groups over the split's images labeled for this attribute.
    std::map<int, std::vector<int>> groups;
    for (const ImageRecord& r : manifest.records) {
        if (r.split != split || !r.has_label(attribute_id)) {
            continue;
        }
        groups[r.label(attribute_id)].push_back(r.id);
    }
    std::vector<int> all_values;
    std::vector<int> pair_values; // values with at least two images
    for (const auto& [value, ids] : groups) {
        all_values.push_back(value);
        if (ids.size() >= 2) {
            pair_values.push_back(value);
        }
    }
    if (all_values.size() < 2 || pair_values.empty()) {
        std::ostringstream msg;
        msg << "attribute " << attribute_id << " cannot form triplets in the "
            << to_string(split) << " split: needs two distinct values and a value "
            << "with two images";
        throw DataError(msg.str());
    }

    Rng rng(seed);
    std::vector<Triplet> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        const int v = pair_values[static_cast<std::size_t>(
            rng.below(static_cast<int>(pair_values.size())))];
        const std::vector<int>& same = groups[v];
        const int ai = rng.below(static_cast<int>(same.size()));
        int pi = rng.below(static_cast<int>(same.size()) - 1);
        if (pi >= ai) {
            ++pi;
        }
        // Uniform over the other values.
        const int v_at = static_cast<int>(
            std::lower_bound(all_values.begin(), all_values.end(), v) - all_values.begin());
        int ni = rng.below(static_cast<int>(all_values.size()) - 1);
        if (ni >= v_at) {
            ++ni;
        }
        const std::vector<int>& other = groups[all_values[static_cast<std::size_t>(ni)]];
        const int negative = other[static_cast<std::size_t>(
            rng.below(static_cast<int>(other.size())))];

        out.push_back({attribute_id, same[static_cast<std::size_t>(ai)],
                       same[static_cast<std::size_t>(pi)], negative});
    }
    return out;
}

std::vector<Triplet> build_epoch_pool(const DatasetManifest& manifest, int total,
                                      std::uint64_t seed, Split split) {
    if (total < 1) {
        throw ContractError("epoch pool size must be positive");
    }
    const int n = manifest.attribute_count();
    if (n < 1) {
        throw DataError("manifest declares no attributes");
    }
    std::vector<Triplet> pool;
    pool.reserve(static_cast<std::size_t>(total));
    for (int a = 0; a < n; ++a) {
        const int share = total / n + (a < total % n ? 1 : 0);
        std::vector<Triplet> part = sample_triplets(
            manifest, a, share, derive_seed(seed, kStreamSample, static_cast<std::uint64_t>(a)),
            split);
        pool.insert(pool.end(), part.begin(), part.end());
    }
    Rng rng(derive_seed(seed, kStreamShuffle, 0));
    rng.shuffle(pool);
    return pool;
}

TrainReport run_training(Checkpoint& ck, StageSelect select, TrainContext& ctx) {
    ctx.config.validate();
    ck.model.validate();
    TrainReport report;

    const bool want1 = select != StageSelect::Stage2;
    const bool want2 = select != StageSelect::Stage1;

    if (want1) {
        if (ck.cursor.stage > 1) {
            throw ConfigError("checkpoint is already past stage 1");
        }
        run_stage(ck, 1, ctx, report);
    }
    if (want2) {
        if (ck.cursor.stage < 1) {
            throw ConfigError("stage 2 needs a stage-1 checkpoint");
        }
        if (ck.cursor.stage == 1 && ck.cursor.epoch < ctx.config.epochs_stage1) {
            log_line(ctx, "note: stage 1 stopped early; continuing into stage 2");
        }
        run_stage(ck, 2, ctx, report);
    }
    return report;
}

} // namespace attrsim
