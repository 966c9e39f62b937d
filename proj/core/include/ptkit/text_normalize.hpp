#pragma once

#include <string>
#include <string_view>

namespace ptkit {

// Undoes UTF-8 text that was decoded as Latin-1 / Windows-1252 and
// re-encoded ("Ã©" -> "é", "â€™" -> "’"). Table driven: every Latin-1
// supplement character and every Windows-1252 punctuation character has its
// two- or three-character artifact in the table. Applied until no artifact
// remains, so doubly-garbled text is repaired too.
std::string repair_mojibake(std::string_view text);

// Drops markup tags ("<br>", "</p>", "<!-- x -->") and decodes named and
// numeric character references.
std::string strip_html(std::string_view text);

// Removes C0/C1 control characters except '\n' and '\t'.
std::string strip_control_chars(std::string_view text);

// Unicode canonical composition (NFC).
std::string compose_nfc(std::string_view text);

// Full normalization: mojibake repair, markup removal, control stripping and
// NFC, iterated to a fixed point. normalize_text(normalize_text(s)) ==
// normalize_text(s) for every valid UTF-8 input.
std::string normalize_text(std::string_view text);

} // namespace ptkit
