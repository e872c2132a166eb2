#include "attrsim/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "attrsim/errors.hpp"
#include "attrsim/resample.hpp"

namespace attrsim {

namespace {

[[noreturn]] void bad_format(const std::string& path, std::size_t offset,
                             const std::string& why) {
    std::ostringstream msg;
    msg << path << ": " << why << " at byte " << offset;
    throw FormatError(msg.str());
}

bool is_space(unsigned char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

// Header scanner over the raw bytes; keeps the offset for error reports.
struct PnmReader {
    const std::string& path;
    const std::vector<unsigned char>& bytes;
    std::size_t pos = 0;

    void skip_space_and_comments() {
        while (pos < bytes.size()) {
            if (is_space(bytes[pos])) {
                ++pos;
            } else if (bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') {
                    ++pos;
                }
            } else {
                break;
            }
        }
    }

    int next_int(const char* what) {
        skip_space_and_comments();
        const std::size_t start = pos;
        long value = 0;
        while (pos < bytes.size() && bytes[pos] >= '0' && bytes[pos] <= '9') {
            value = value * 10 + (bytes[pos] - '0');
            if (value > 1 << 30) {
                bad_format(path, start, std::string(what) + " out of range");
            }
            ++pos;
        }
        if (pos == start) {
            bad_format(path, pos, std::string("expected ") + what);
        }
        return static_cast<int>(value);
    }
};

std::vector<unsigned char> read_all(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open image '" + path + "'");
    }
    return std::vector<unsigned char>(std::istreambuf_iterator<char>(in),
                                      std::istreambuf_iterator<char>());
}

unsigned char quantize(double v) {
    const double c = std::clamp(v, 0.0, 1.0);
    return static_cast<unsigned char>(std::lround(c * 255.0));
}

void write_bytes(const std::string& path, const std::string& header,
                 const std::vector<unsigned char>& body) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw DataError("cannot write image '" + path + "'");
    }
    out << header;
    out.write(reinterpret_cast<const char*>(body.data()),
              static_cast<std::streamsize>(body.size()));
    if (!out.flush()) {
        throw DataError("short write to '" + path + "'");
    }
}

} // namespace

RawImage read_pnm(const std::string& path) {
    const std::vector<unsigned char> bytes = read_all(path);
    PnmReader r{path, bytes};
    if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
        bad_format(path, 0, "not a binary P5/P6 file");
    }
    RawImage img;
    img.channels = bytes[1] == '6' ? 3 : 1;
    r.pos = 2;
    img.width = r.next_int("width");
    img.height = r.next_int("height");
    if (img.width < 1 || img.height < 1) {
        bad_format(path, 2, "degenerate dimensions");
    }
    const std::size_t maxval_at = r.pos;
    const int maxval = r.next_int("maxval");
    if (maxval != 255) {
        bad_format(path, maxval_at, "depth is not 8-bit");
    }
    if (r.pos >= bytes.size() || !is_space(bytes[r.pos])) {
        bad_format(path, r.pos, "missing separator before pixel data");
    }
    ++r.pos; // exactly one whitespace byte before the raster
    const std::size_t need = static_cast<std::size_t>(img.width) * img.height * img.channels;
    if (bytes.size() - r.pos < need) {
        bad_format(path, bytes.size(), "truncated pixel data");
    }
    img.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(r.pos),
                      bytes.begin() + static_cast<std::ptrdiff_t>(r.pos + need));
    return img;
}

void save_image(const Tensor& image, const std::string& path) {
    if (image.ndim() != 3 || image.extent(0) != 3) {
        throw ShapeError("save_image expects [3,h,w], got " + shape_str(image.shape()));
    }
    const int h = image.extent(1);
    const int w = image.extent(2);
    std::ostringstream header;
    header << "P6\n" << w << ' ' << h << "\n255\n";
    std::vector<unsigned char> body(static_cast<std::size_t>(h) * w * 3);
    std::size_t at = 0;
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            for (int ch = 0; ch < 3; ++ch) {
                body[at++] = quantize(image(ch, r, c));
            }
        }
    }
    write_bytes(path, header.str(), body);
}

Tensor decode_image(const RawImage& raw) {
    Tensor out = Tensor::zeros({raw.channels, raw.height, raw.width});
    auto v = out.mutable_data();
    const std::size_t plane = static_cast<std::size_t>(raw.height) * raw.width;
    for (int r = 0; r < raw.height; ++r) {
        for (int c = 0; c < raw.width; ++c) {
            const std::size_t px = (static_cast<std::size_t>(r) * raw.width + c);
            for (int ch = 0; ch < raw.channels; ++ch) {
                v[static_cast<std::size_t>(ch) * plane + px] =
                    raw.pixels[px * raw.channels + static_cast<std::size_t>(ch)] / 255.0;
            }
        }
    }
    return out;
}

Tensor load_image(const std::string& path, int side) {
    if (side < 1) {
        throw ContractError("load_image side must be positive");
    }
    RawImage raw = read_pnm(path);
    if (raw.channels != 3) {
        throw FormatError(path + ": expected a color P6 image");
    }
    Tensor img = decode_image(raw);
    const int h = raw.height;
    const int w = raw.width;
    if (h == side && w == side) {
        return img;
    }
    // Short edge to `side`, the long edge in proportion, then center crop.
    const int short_edge = std::min(h, w);
    const int nh = static_cast<int>(std::lround(static_cast<double>(h) * side / short_edge));
    const int nw = static_cast<int>(std::lround(static_cast<double>(w) * side / short_edge));
    Tensor scaled = (nh == h && nw == w) ? img : bilinear_resize(img, nh, nw);
    const int r0 = (nh - side) / 2;
    const int c0 = (nw - side) / 2;
    Tensor out = Tensor::zeros({3, side, side});
    auto dst = out.mutable_data();
    std::size_t at = 0;
    for (int ch = 0; ch < 3; ++ch) {
        for (int r = 0; r < side; ++r) {
            for (int c = 0; c < side; ++c) {
                dst[at++] = scaled(ch, r0 + r, c0 + c);
            }
        }
    }
    return out;
}

void save_attention_map(const Tensor& map2d, const std::string& path) {
    if (map2d.ndim() != 2) {
        throw ShapeError("attention map must be 2-d, got " + shape_str(map2d.shape()));
    }
    const auto v = map2d.data();
    double lo = v[0], hi = v[0];
    for (double x : v) {
        lo = std::min(lo, x);
        hi = std::max(hi, x);
    }
    const int h = map2d.extent(0);
    const int w = map2d.extent(1);
    std::ostringstream header;
    header << "P5\n" << w << ' ' << h << "\n255\n";
    std::vector<unsigned char> body(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        body[i] = hi > lo ? static_cast<unsigned char>(
                                std::lround((v[i] - lo) / (hi - lo) * 255.0))
                          : static_cast<unsigned char>(128);
    }
    write_bytes(path, header.str(), body);
}

Tensor load_attention_map(const std::string& path) {
    RawImage raw = read_pnm(path);
    if (raw.channels != 1) {
        throw FormatError(path + ": expected a graymap P5 image");
    }
    Tensor out = Tensor::zeros({raw.height, raw.width});
    auto v = out.mutable_data();
    for (std::size_t i = 0; i < raw.pixels.size(); ++i) {
        v[i] = raw.pixels[i] / 255.0;
    }
    return out;
}

} // namespace attrsim
