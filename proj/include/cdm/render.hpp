#pragma once

#include <map>
#include <string>

#include "cdm/graph.hpp"

namespace cdm {

struct NodePlacement {
    double x = 0;  // causal order: longest-path layer among causal nodes
    int y = 0;     // observational stage
    std::string shape;  // circle or diamond
    bool filled = false;
};

/// Causal nodes get their layer in the causal projection; other nodes sit
/// right of their rightmost parent by half a layer (population at 0).
std::map<std::string, NodePlacement> render_layout(const DesignGraph& g);

std::string glyph_shape(InfoAttr info);
bool glyph_filled(InfoAttr info);

std::string to_dot(const DesignGraph& g);

}  // namespace cdm
