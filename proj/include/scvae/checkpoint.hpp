#pragma once

#include <string>

#include "scvae/model.hpp"

namespace scvae {

// Plain-text checkpoint: a config header followed by one record per parameter
// tensor in construction order — `name<TAB>shape<TAB>values` with %.17g
// doubles, so saving the same parameters always produces identical bytes and
// a load/save round trip is exact.
std::string checkpoint_to_string(const Model& model);
Model checkpoint_from_string(const std::string& text);

void save_checkpoint(const std::string& path, const Model& model);
Model load_checkpoint(const std::string& path);

// Write-then-rename so readers never observe a partial file.
void atomic_write_file(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

}  // namespace scvae
