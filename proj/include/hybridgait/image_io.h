/* Copyright (c) 2026 The HybridGait Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License. */

#pragma once

#include <filesystem>

#include "hybridgait/skeleton.h"

namespace hybridgait {

/// 8-bit grayscale PNG, foreground stored as 255.
void write_mask_png(const Mask& mask, const std::filesystem::path& path);

/// Any PNG readable by libpng, converted to grayscale; values >= 128 are
/// foreground. Throws DataError on unreadable files.
Mask read_mask_png(const std::filesystem::path& path);

}  // namespace hybridgait
