#include "aadtcast/aadtcast.h"

#include <stdio.h>
#include <string.h>

int main(void) {
  aadt_series* s = NULL;
  const double values[] = {1.0, 2.0, 3.0};
  aadt_series_summary sum;
  if (aadt_series_create(0, values, 3, "C", &s) != AADT_OK) return 1;
  if (aadt_series_summary_get(s, &sum) != AADT_OK) return 1;
  aadt_series_free(s);
  if (sum.length != 3 || strcmp(sum.start, "1970-01-01T00") != 0) return 1;
  printf("aadtcast %s\n", aadt_version());
  return 0;
}
