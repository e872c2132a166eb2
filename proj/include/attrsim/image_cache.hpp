#pragma once

#include <map>
#include <string>

#include "attrsim/dataset.hpp"
#include "attrsim/tensor.hpp"

namespace attrsim {

// Lazily loads dataset images at a fixed side and keeps them resident; the
// desk-scale corpus fits in memory many times over.
class ImageCache {
public:
    ImageCache(const DatasetManifest& manifest, std::string root, int side);

    const Tensor& image(int image_id);
    int side() const { return side_; }

private:
    const DatasetManifest* manifest_;
    std::string root_;
    int side_;
    std::map<int, Tensor> cache_;
};

} // namespace attrsim
