#include "etsim/trace.hpp"

namespace etsim {

std::string Trace::resource_name(int r) const {
    if (has_dma && r == num_sms) return "DMA";
    return "SM" + std::to_string(r);
}

}  // namespace etsim
