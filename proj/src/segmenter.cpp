#include "cotc/segmenter.hpp"

#include "cotc/entropy.hpp"
#include "cotc/errors.hpp"

#include <cctype>
#include <string_view>

namespace cotc::segmenter {

namespace {

constexpr std::string_view kThinkOpen = "<think>";
constexpr std::string_view kThinkClose = "</think>";

std::size_t count_occurrences(const std::string& haystack, std::string_view needle,
                              std::size_t* first = nullptr) {
    std::size_t n = 0;
    std::size_t pos = haystack.find(needle);
    if (first) *first = pos;
    while (pos != std::string::npos) {
        ++n;
        pos = haystack.find(needle, pos + needle.size());
    }
    return n;
}

bool whitespace_only(const std::string& text, std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
        if (!std::isspace(static_cast<unsigned char>(text[i]))) return false;
    }
    return true;
}

} // namespace

std::vector<CharSpan> split_steps(const std::string& text) {
    // Leading/trailing newline runs are delimiter residue, not step text.
    std::size_t lo = 0;
    std::size_t hi = text.size();
    while (lo < hi && text[lo] == '\n') ++lo;
    while (hi > lo && text[hi - 1] == '\n') --hi;

    std::vector<CharSpan> out;
    auto flush = [&](std::size_t begin, std::size_t end) {
        if (begin < end && !whitespace_only(text, begin, end)) out.push_back({begin, end});
    };

    std::size_t seg_start = lo;
    std::size_t i = lo;
    while (i < hi) {
        if (text[i] == '\n' && i + 1 < hi && text[i + 1] == '\n') {
            flush(seg_start, i);
            while (i < hi && text[i] == '\n') ++i; // a run of 3+ is still one boundary
            seg_start = i;
        } else {
            ++i;
        }
    }
    flush(seg_start, hi);
    return out;
}

std::vector<TokenSpan> step_token_spans(const TraceRecord& record,
                                        const std::vector<CharSpan>& char_ranges) {
    // Token character offsets; also re-checks alignment since the rest of the
    // mapping silently depends on it.
    std::vector<std::size_t> starts;
    starts.reserve(record.tokens.size() + 1);
    std::size_t off = 0;
    for (const auto& t : record.tokens) {
        starts.push_back(off);
        off += t.text.size();
    }
    starts.push_back(off);
    if (off != record.raw_completion.size()) {
        throw AlignmentError("record '" + record.id + "': tokens do not tile raw_completion");
    }

    std::size_t prev_end = 0;
    for (const auto& r : char_ranges) {
        if (r.begin >= r.end || r.begin < prev_end || r.end > record.raw_completion.size()) {
            throw ValueError("step char ranges must be non-empty, ascending and in bounds");
        }
        prev_end = r.end;
    }

    std::vector<TokenSpan> spans(char_ranges.size());
    std::vector<bool> seen(char_ranges.size(), false);

    std::size_t range_idx = 0;
    for (std::size_t ti = 0; ti < record.tokens.size() && range_idx < char_ranges.size(); ++ti) {
        const std::size_t ts = starts[ti];
        const std::size_t te = starts[ti + 1];
        if (ts == te) continue; // empty token text, belongs nowhere
        while (range_idx < char_ranges.size() && char_ranges[range_idx].end <= ts) ++range_idx;
        if (range_idx >= char_ranges.size()) break;

        // All ranges this token overlaps. Content characters are exactly the
        // characters inside step ranges, so overlapping two ranges means the
        // token mixes content from both sides of a boundary.
        std::size_t k = range_idx;
        std::size_t hits = 0;
        std::size_t owner = 0;
        while (k < char_ranges.size() && char_ranges[k].begin < te) {
            if (char_ranges[k].end > ts) {
                if (hits++ == 0) owner = k;
            }
            ++k;
        }
        if (hits == 0) continue; // pure delimiter/residue token
        if (hits > 1) {
            throw TokenBoundaryError("token '" + record.tokens[ti].text +
                                     "' carries content from two adjacent steps");
        }
        if (!seen[owner]) {
            spans[owner] = {ti, ti + 1};
            seen[owner] = true;
        } else {
            spans[owner].end = ti + 1;
        }
    }

    for (std::size_t i = 0; i < char_ranges.size(); ++i) {
        if (!seen[i]) {
            throw TokenBoundaryError("no token covers step characters [" +
                                     std::to_string(char_ranges[i].begin) + ", " +
                                     std::to_string(char_ranges[i].end) + ")");
        }
    }
    return spans;
}

SegmentedTrace segment(TraceRecord record) {
    validate(record);
    const std::string& text = record.raw_completion;

    std::size_t open_pos = 0;
    std::size_t close_pos = 0;
    const std::size_t n_open = count_occurrences(text, kThinkOpen, &open_pos);
    const std::size_t n_close = count_occurrences(text, kThinkClose, &close_pos);
    if (n_open == 0 || n_close == 0) {
        throw MissingThinkTags("record '" + record.id + "': completion lacks a <think>...</think> pair");
    }
    if (n_open > 1 || n_close > 1) {
        throw MultipleThinkBlocks("record '" + record.id + "': more than one think block");
    }
    const std::size_t content_begin = open_pos + kThinkOpen.size();
    if (close_pos < content_begin) {
        throw MissingThinkTags("record '" + record.id + "': </think> precedes <think>");
    }

    SegmentedTrace seg;
    seg.think_span = {content_begin, close_pos};
    seg.tail = text.substr(close_pos + kThinkClose.size());

    const std::string content = text.substr(content_begin, close_pos - content_begin);
    std::vector<CharSpan> ranges = split_steps(content);
    for (auto& r : ranges) {
        r.begin += content_begin;
        r.end += content_begin;
    }

    const std::vector<TokenSpan> token_spans = step_token_spans(record, ranges);

    seg.steps.reserve(ranges.size());
    for (std::size_t i = 0; i < ranges.size(); ++i) {
        Step step;
        step.index = i;
        step.token_span = token_spans[i];
        step.text = text.substr(ranges[i].begin, ranges[i].end - ranges[i].begin);
        double bits = 0.0;
        for (std::size_t t = step.token_span.begin; t < step.token_span.end; ++t) {
            bits += entropy::token_bits(record.tokens[t]);
        }
        step.entropy_bits = bits;
        seg.steps.push_back(std::move(step));
    }
    seg.source = std::move(record);
    return seg;
}

std::size_t think_token_count(const SegmentedTrace& segmented) {
    std::size_t n = 0;
    for (const auto& s : segmented.steps) n += s.token_span.size();
    return n;
}

} // namespace cotc::segmenter
