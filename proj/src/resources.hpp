// Copyright (c) 2026 The dialog-reader Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string_view>

namespace mrdt::detail {

std::string_view default_ontology_text();
std::string_view default_templates_text();

}  // namespace mrdt::detail
