#include "attrsim/synthetic.hpp"

#include <algorithm>
#include <filesystem>
#include <iomanip>
#include <sstream>

#include "attrsim/errors.hpp"
#include "attrsim/image_io.hpp"
#include "attrsim/rng.hpp"

namespace attrsim {

namespace {

constexpr double kBackground = 0.45;
constexpr double kStripeDark = 0.15;
constexpr double kWeaveBright = 0.95;
constexpr int kMaxValues = 32;

constexpr double kPalette[8][3] = {
    {0.90, 0.10, 0.10}, // red
    {0.10, 0.80, 0.15}, // green
    {0.15, 0.20, 0.90}, // blue
    {0.90, 0.85, 0.10}, // yellow
    {0.85, 0.15, 0.85}, // magenta
    {0.10, 0.85, 0.85}, // cyan
    {0.95, 0.55, 0.10}, // orange
    {0.95, 0.95, 0.95}, // white
};

// Seed streams for the generator's independent random decisions.
constexpr std::uint64_t kStreamJitter = 41;
constexpr std::uint64_t kStreamSplit = 42;

struct Band {
    int row0;
    int row1; // exclusive
};

Band band_of(const SyntheticSpec& spec, int attribute) {
    const int n = static_cast<int>(spec.attributes.size());
    return {attribute * spec.side / n, (attribute + 1) * spec.side / n};
}

// Each attribute expresses its value through its own motif family, so a
// distractor in a foreign band never mimics a labeled value: even attributes
// encode the value as the color of a solid square (texture kicks in past the
// 8-color palette), odd attributes as the orientation and period of a
// bright/dark stripe weave.
void draw_glyph(Tensor& img, const SyntheticSpec& spec, int attribute, int value,
                Rng& rng) {
    const Band band = band_of(spec, attribute);
    const int band_h = band.row1 - band.row0;
    int g = std::clamp(band_h * 4 / 5, 2, band_h - 2);
    g = std::min(g, spec.side - 2);

    const int x_room = spec.side - g - 1;
    const int x0 = x_room > 1 ? 1 + rng.below(x_room - 1) : 0;
    const int y_room = band_h - g - 1;
    const int y0 = band.row0 + (y_room > 1 ? 1 + rng.below(y_room - 1)
                                           : std::max(0, (band_h - g) / 2));

    const bool color_coded = attribute % 2 == 0;
    const double* color = kPalette[value % 8];
    const int texture = color_coded ? value / 8 : 0;
    const int orient = value % 4;
    const int weave = 3 + 2 * (value / 4);

    auto v = img.mutable_data();
    const std::size_t plane = static_cast<std::size_t>(spec.side) * spec.side;
    for (int r = 0; r < g; ++r) {
        for (int c = 0; c < g; ++c) {
            bool on = true;
            if (color_coded) {
                switch (texture) {
                case 1:
                    on = (r / 2) % 2 == 0;
                    break;
                case 2:
                    on = (c / 2) % 2 == 0;
                    break;
                case 3:
                    on = ((r / 2) + (c / 2)) % 2 == 0;
                    break;
                default:
                    break;
                }
            } else {
                switch (orient) {
                case 0:
                    on = (r / weave) % 2 == 0;
                    break;
                case 1:
                    on = (c / weave) % 2 == 0;
                    break;
                case 2:
                    on = ((r + c) / weave) % 2 == 0;
                    break;
                default:
                    on = ((r / weave) + (c / weave)) % 2 == 0;
                    break;
                }
            }
            const std::size_t px =
                static_cast<std::size_t>(y0 + r) * spec.side + (x0 + c);
            for (int ch = 0; ch < 3; ++ch) {
                const double bright = color_coded ? color[ch] : kWeaveBright;
                v[static_cast<std::size_t>(ch) * plane + px] = on ? bright : kStripeDark;
            }
        }
    }
}

} // namespace

void SyntheticSpec::validate() const {
    if (attributes.empty()) {
        throw ConfigError("synthetic spec declares no attributes");
    }
    for (std::size_t i = 0; i < attributes.size(); ++i) {
        const AttributeDef& a = attributes[i];
        if (a.id != static_cast<int>(i)) {
            throw ConfigError("attribute ids must be dense starting at 0");
        }
        if (a.value_count < 2) {
            throw ConfigError("attribute '" + a.name + "' needs at least 2 values");
        }
        if (a.value_count > kMaxValues) {
            throw ConfigError("attribute '" + a.name + "' exceeds the " +
                              std::to_string(kMaxValues) + "-value palette");
        }
        if (a.name.empty()) {
            throw ConfigError("attribute without a name");
        }
    }
    if (per_value < 2) {
        throw ConfigError("need at least 2 images per attribute value");
    }
    if (side < 8) {
        throw ConfigError("image side must be at least 8");
    }
    const int band_h = side / static_cast<int>(attributes.size());
    if (band_h < 6) {
        throw ConfigError("too many attributes for this image side: bands need 6 rows");
    }
    if (noise < 0.0 || noise > 1.0) {
        throw ConfigError("noise level must lie in [0,1]");
    }
}

Tensor render_image(const SyntheticSpec& spec, int attribute, int value,
                    std::uint64_t jitter_seed) {
    spec.validate();
    const int n = static_cast<int>(spec.attributes.size());
    if (attribute < 0 || attribute >= n) {
        throw DomainError("attribute id " + std::to_string(attribute) + " out of range");
    }
    if (value < 0 || value >= spec.attributes[static_cast<std::size_t>(attribute)].value_count) {
        throw DomainError("value id " + std::to_string(value) + " out of range");
    }

    Tensor img = Tensor::full({3, spec.side, spec.side}, kBackground);
    Rng rng(jitter_seed);

    // Bands in ascending attribute order; the labeled band always draws its
    // motif, the others hold a random unlabeled distractor half the time.
    for (int b = 0; b < n; ++b) {
        if (b == attribute) {
            draw_glyph(img, spec, b, value, rng);
        } else if (rng.uniform() < 0.5) {
            const int dv = rng.below(spec.attributes[static_cast<std::size_t>(b)].value_count);
            draw_glyph(img, spec, b, dv, rng);
        }
    }

    if (spec.noise > 0.0) {
        for (double& v : img.mutable_data()) {
            v = std::clamp(v + spec.noise * (2.0 * rng.uniform() - 1.0), 0.0, 1.0);
        }
    }
    return img;
}

DatasetManifest generate_synthetic_dataset(const SyntheticSpec& spec,
                                           const std::string& out_dir,
                                           std::uint64_t seed) {
    spec.validate();
    namespace fs = std::filesystem;
    const fs::path root(out_dir);
    fs::create_directories(root / "images");

    DatasetManifest m;
    m.attributes = spec.attributes;

    int next_id = 0;
    int cell = 0;
    for (const AttributeDef& a : spec.attributes) {
        for (int v = 0; v < a.value_count; ++v, ++cell) {
            const int first_id = next_id;
            for (int i = 0; i < spec.per_value; ++i, ++next_id) {
                const std::uint64_t jitter = derive_seed(seed, kStreamJitter,
                                                         static_cast<std::uint64_t>(next_id));
                Tensor img = render_image(spec, a.id, v, jitter);
                std::ostringstream name;
                name << "images/img_" << std::setw(6) << std::setfill('0') << next_id
                     << ".ppm";
                save_image(img, (root / name.str()).string());

                ImageRecord rec;
                rec.id = next_id;
                rec.path = name.str();
                rec.labels[a.id] = v;
                m.records.push_back(std::move(rec));
            }

            // 8:1:1 split of this cell, then 1:4 query:candidate in val/test.
            std::vector<int> order(static_cast<std::size_t>(spec.per_value));
            for (int i = 0; i < spec.per_value; ++i) {
                order[static_cast<std::size_t>(i)] = first_id + i;
            }
            Rng split_rng(derive_seed(seed, kStreamSplit, static_cast<std::uint64_t>(cell)));
            split_rng.shuffle(order);
            const int n_val = spec.per_value / 10;
            const int n_test = spec.per_value / 10;
            const int n_train = spec.per_value - n_val - n_test;
            auto assign = [&](int from, int count, Split s) {
                const int n_query = count > 0 ? std::max(1, count / 5) : 0;
                for (int i = 0; i < count; ++i) {
                    ImageRecord& rec = m.records[static_cast<std::size_t>(
                        order[static_cast<std::size_t>(from + i)])];
                    rec.split = s;
                    rec.role = s == Split::Train ? Role::None
                               : i < n_query     ? Role::Query
                                                 : Role::Candidate;
                }
            };
            assign(0, n_train, Split::Train);
            assign(n_train, n_val, Split::Val);
            assign(n_train + n_val, n_test, Split::Test);
        }
    }

    m.validate();
    save_manifest(m, (root / "manifest.txt").string());
    return m;
}

} // namespace attrsim
