// Half-open integer intervals over a series and conversions to point masks.
#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace distill {

struct Event {
    std::size_t start = 0;
    std::size_t end = 0;  // exclusive

    std::size_t length() const { return end - start; }
    bool contains(std::size_t t) const { return t >= start && t < end; }
    bool operator==(const Event&) const = default;
};

// Sorted, disjoint, nonempty events within [0, horizon).
struct EventSet {
    std::vector<Event> events;
    std::size_t horizon = 0;

    bool empty() const { return events.empty(); }
    std::size_t size() const { return events.size(); }
    bool operator==(const EventSet&) const = default;
};

// Merges runs of nonzero entries.
EventSet events_from_mask(const std::vector<std::uint8_t>& mask);
std::vector<std::uint8_t> mask_from_events(const EventSet& set);

// Sorts and merges overlapping or adjacent intervals, drops empty ones and
// checks bounds (DataError when an interval exceeds the horizon).
EventSet normalize_events(std::vector<Event> events, std::size_t horizon);

}  // namespace distill
