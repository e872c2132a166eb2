#include "attrsim/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "attrsim/binio.hpp"
#include "attrsim/errors.hpp"

namespace attrsim {

namespace {

constexpr char kMagic[8] = {'A', 'T', 'R', 'S', 'M', 'C', 'K', '\n'};
constexpr std::uint32_t kVersion = 1;

void write_backbone(std::ostream& out, const BackboneConfig& b) {
    write_i32(out, b.input_side);
    write_i32(out, b.in_channels);
    write_u32(out, static_cast<std::uint32_t>(b.blocks.size()));
    for (const ConvBlockSpec& s : b.blocks) {
        write_i32(out, s.out_channels);
        write_i32(out, s.kernel);
        write_i32(out, s.stride);
    }
}

BackboneConfig read_backbone(std::istream& in) {
    BackboneConfig b;
    b.input_side = read_i32(in, "backbone side");
    b.in_channels = read_i32(in, "backbone channels");
    const std::uint32_t n = read_u32(in, "block count");
    if (n > 64) {
        throw FormatError("implausible backbone depth in checkpoint");
    }
    for (std::uint32_t i = 0; i < n; ++i) {
        ConvBlockSpec s;
        s.out_channels = read_i32(in, "block channels");
        s.kernel = read_i32(in, "block kernel");
        s.stride = read_i32(in, "block stride");
        b.blocks.push_back(s);
    }
    return b;
}

void write_config(std::ostream& out, const ModelConfig& c) {
    write_i32(out, c.n_attributes);
    write_i32(out, c.dims.c);
    write_i32(out, c.dims.c_a);
    write_i32(out, c.dims.c_1);
    write_i32(out, c.dims.c_2);
    write_i32(out, c.dims.c_o);
    write_i32(out, c.dims.r);
    write_backbone(out, c.global_backbone);
    write_backbone(out, c.local_backbone);
    write_f64(out, c.localization.tau);
    write_i32(out, c.localization.connectivity);
    write_i32(out, static_cast<std::int32_t>(c.localization.region_mode));
    write_i32(out, c.localization.min_side);
    write_i32(out, c.localization.local_input_side);
}

ModelConfig read_config(std::istream& in) {
    ModelConfig c;
    c.n_attributes = read_i32(in, "attribute count");
    c.dims.c = read_i32(in, "dim c");
    c.dims.c_a = read_i32(in, "dim c_a");
    c.dims.c_1 = read_i32(in, "dim c_1");
    c.dims.c_2 = read_i32(in, "dim c_2");
    c.dims.c_o = read_i32(in, "dim c_o");
    c.dims.r = read_i32(in, "dim r");
    c.global_backbone = read_backbone(in);
    c.local_backbone = read_backbone(in);
    c.localization.tau = read_f64(in, "tau");
    c.localization.connectivity = read_i32(in, "connectivity");
    const std::int32_t mode = read_i32(in, "region mode");
    if (mode < 0 || mode > 2) {
        throw CompatibilityError("unknown region mode in checkpoint");
    }
    c.localization.region_mode = static_cast<RegionMode>(mode);
    c.localization.min_side = read_i32(in, "min side");
    c.localization.local_input_side = read_i32(in, "local side");
    return c;
}

void write_adam(std::ostream& out, const AdamState& a) {
    write_f64(out, a.config().lr);
    write_f64(out, a.config().beta1);
    write_f64(out, a.config().beta2);
    write_f64(out, a.config().eps);
    write_i64(out, a.step_count());
    write_u32(out, static_cast<std::uint32_t>(a.first_moments().size()));
    for (std::size_t i = 0; i < a.first_moments().size(); ++i) {
        const auto& m = a.first_moments()[i];
        const auto& v = a.second_moments()[i];
        write_u64(out, m.size());
        write_f64_block(out, m.data(), m.size());
        write_f64_block(out, v.data(), v.size());
    }
}

AdamState read_adam(std::istream& in, const std::vector<NamedTensor>& group,
                    const char* which) {
    AdamConfig cfg;
    cfg.lr = read_f64(in, "adam lr");
    cfg.beta1 = read_f64(in, "adam beta1");
    cfg.beta2 = read_f64(in, "adam beta2");
    cfg.eps = read_f64(in, "adam eps");
    AdamState state(cfg);
    const std::int64_t steps = read_i64(in, "adam steps");
    const std::uint32_t n = read_u32(in, "adam group size");
    if (n != 0 && n != group.size()) {
        std::ostringstream msg;
        msg << which << " optimizer group holds " << n << " parameters, model has "
            << group.size();
        throw CompatibilityError(msg.str());
    }
    std::vector<std::vector<double>> m, v;
    for (std::uint32_t i = 0; i < n; ++i) {
        const std::uint64_t count = read_u64(in, "moment length");
        if (count != group[i].tensor.size()) {
            throw CompatibilityError("optimizer moments for '" + group[i].name +
                                     "' do not match the parameter shape");
        }
        m.push_back(read_f64_block(in, count, "first moment"));
        v.push_back(read_f64_block(in, count, "second moment"));
    }
    state.restore(steps, std::move(m), std::move(v));
    return state;
}

} // namespace

void save_checkpoint(const Checkpoint& ck, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw DataError("cannot write checkpoint '" + path + "'");
    }
    out.write(kMagic, 8);
    write_u32(out, kVersion);
    write_config(out, ck.model.config);
    write_i32(out, ck.cursor.stage);
    write_i32(out, ck.cursor.epoch);
    write_u8(out, ck.has_optimizer ? 1 : 0);

    const std::vector<NamedTensor> params = ck.model.parameters();
    write_u32(out, static_cast<std::uint32_t>(params.size()));
    for (const NamedTensor& p : params) {
        write_string(out, p.name);
        write_u64(out, p.tensor.size());
        write_f64_block(out, p.tensor.data().data(), p.tensor.size());
    }
    if (ck.has_optimizer) {
        write_adam(out, ck.adam_global);
        write_adam(out, ck.adam_local);
    }
    if (!out.flush()) {
        throw DataError("short write to checkpoint '" + path + "'");
    }
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open checkpoint '" + path + "'");
    }
    char magic[8];
    if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) {
        throw FormatError("'" + path + "' is not a checkpoint file");
    }
    const std::uint32_t version = read_u32(in, "version");
    if (version != kVersion) {
        std::ostringstream msg;
        msg << "checkpoint version " << version << " is not supported (expect "
            << kVersion << ")";
        throw CompatibilityError(msg.str());
    }

    const ModelConfig config = read_config(in);
    config.validate();

    Checkpoint ck;
    ck.model = init_model(config, 0);
    ck.cursor.stage = read_i32(in, "cursor stage");
    ck.cursor.epoch = read_i32(in, "cursor epoch");
    ck.has_optimizer = read_u8(in, "optimizer flag") != 0;

    std::vector<NamedTensor> params = ck.model.parameters();
    const std::uint32_t stored = read_u32(in, "parameter count");
    if (stored != params.size()) {
        std::ostringstream msg;
        msg << "checkpoint stores " << stored << " parameters, model expects "
            << params.size();
        throw CompatibilityError(msg.str());
    }
    for (NamedTensor& p : params) {
        const std::string name = read_string(in, "parameter name");
        if (name != p.name) {
            throw CompatibilityError("parameter order mismatch: found '" + name +
                                     "', expected '" + p.name + "'");
        }
        const std::uint64_t count = read_u64(in, "parameter length");
        if (count != p.tensor.size()) {
            std::ostringstream msg;
            msg << "parameter '" << name << "' stores " << count << " values, expected "
                << p.tensor.size();
            throw CompatibilityError(msg.str());
        }
        auto dst = p.tensor.mutable_data();
        for (std::size_t i = 0; i < count; ++i) {
            dst[i] = read_f64(in, "parameter data");
        }
    }
    if (ck.has_optimizer) {
        ck.adam_global = read_adam(in, ck.model.global_parameters(), "global");
        ck.adam_local = read_adam(in, ck.model.local_parameters(), "local");
    }
    return ck;
}

} // namespace attrsim
