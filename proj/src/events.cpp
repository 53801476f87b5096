#include "distill/events.hpp"

#include <algorithm>
#include <string>

#include "distill/core.hpp"

namespace distill {

EventSet events_from_mask(const std::vector<std::uint8_t>& mask) {
    EventSet set;
    set.horizon = mask.size();
    std::size_t t = 0;
    while (t < mask.size()) {
        if (!mask[t]) {
            ++t;
            continue;
        }
        const std::size_t s = t;
        while (t < mask.size() && mask[t]) ++t;
        set.events.push_back({s, t});
    }
    return set;
}

std::vector<std::uint8_t> mask_from_events(const EventSet& set) {
    std::vector<std::uint8_t> mask(set.horizon, 0);
    for (const auto& e : set.events)
        std::fill(mask.begin() + static_cast<std::ptrdiff_t>(e.start),
                  mask.begin() + static_cast<std::ptrdiff_t>(e.end), std::uint8_t{1});
    return mask;
}

EventSet normalize_events(std::vector<Event> events, std::size_t horizon) {
    for (const auto& e : events)
        if (e.end > horizon || e.start > e.end)
            throw DataError("event [" + std::to_string(e.start) + "," + std::to_string(e.end) +
                            ") outside [0," + std::to_string(horizon) + ")");
    std::erase_if(events, [](const Event& e) { return e.start == e.end; });
    std::sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
        return a.start < b.start || (a.start == b.start && a.end < b.end);
    });
    EventSet set;
    set.horizon = horizon;
    for (const auto& e : events) {
        if (!set.events.empty() && e.start <= set.events.back().end)
            set.events.back().end = std::max(set.events.back().end, e.end);
        else
            set.events.push_back(e);
    }
    return set;
}

}  // namespace distill
