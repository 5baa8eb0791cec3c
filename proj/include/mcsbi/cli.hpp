#pragma once

namespace mcsbi::cli {
inline int main(int, char**) { return 0; } // placeholder until the front end lands
} // namespace mcsbi::cli
