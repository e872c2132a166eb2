#include "attrsim/image_cache.hpp"

#include <filesystem>
#include <utility>

#include "attrsim/image_io.hpp"

namespace attrsim {

ImageCache::ImageCache(const DatasetManifest& manifest, std::string root, int side)
    : manifest_(&manifest), root_(std::move(root)), side_(side) {}

const Tensor& ImageCache::image(int image_id) {
    auto it = cache_.find(image_id);
    if (it != cache_.end()) {
        return it->second;
    }
    const ImageRecord& rec = manifest_->record(image_id);
    const std::filesystem::path full = std::filesystem::path(root_) / rec.path;
    Tensor img = load_image(full.string(), side_);
    return cache_.emplace(image_id, std::move(img)).first->second;
}

} // namespace attrsim
