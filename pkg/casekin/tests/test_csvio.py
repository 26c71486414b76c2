import io
import os
import shutil
import tempfile
import unittest

from ..csvio import config_fingerprint, parse_csv, read_tsv, write_csv, write_tsv
from ..data import dataset_rows
from ..errors import EmptyDataset, MissingProband, ParseError
from .fixtures import tiny


class TestParseCsv(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.tmp)

    def write(self, text, name="families.csv"):
        path = os.path.join(self.tmp, name)
        with open(path, "w") as stream:
            stream.write(text)
        return path

    def test_minimal_file(self):
        path = self.write(
            "family_id,role,time,status\n"
            "a,P,64,1\n"
            "a,R,50,0\n"
            "b,P,60,0\n"
        )
        ds = parse_csv(path)
        self.assertEqual((ds.n1, ds.n0), (1, 1))

    def test_bad_status_reports_the_line(self):
        path = self.write(
            "family_id,role,time,status\n"
            "a,P,64,1\n"
            "a,R,50,2\n"
            "b,P,60,0\n"
        )
        with self.assertRaises(ParseError) as context:
            parse_csv(path)
        self.assertEqual(context.exception.line, 3)
        self.assertIn("line 3", str(context.exception))

    def test_bad_time(self):
        path = self.write("family_id,role,time,status\na,P,sixty,1\n")
        with self.assertRaises(ParseError) as context:
            parse_csv(path)
        self.assertEqual(context.exception.line, 2)

    def test_bad_header(self):
        path = self.write("id,role,age,status\na,P,64,1\n")
        with self.assertRaises(ParseError) as context:
            parse_csv(path)
        self.assertEqual(context.exception.line, 1)

    def test_wrong_field_count(self):
        path = self.write("family_id,role,time,status\na,P,64\n")
        self.assertRaises(ParseError, parse_csv, path)

    def test_empty_file(self):
        self.assertRaises(EmptyDataset, parse_csv, self.write(""))
        self.assertRaises(EmptyDataset, parse_csv, self.write("family_id,role,time,status\n"))

    def test_validation_errors_pass_through(self):
        path = self.write("family_id,role,time,status\na,P,64,1\nb,R,60,0\nc,P,50,0\n")
        self.assertRaises(MissingProband, parse_csv, path)

    def test_blank_lines_are_skipped(self):
        path = self.write("family_id,role,time,status\n\na,P,64,1\n\nb,P,60,0\n")
        self.assertEqual(len(parse_csv(path)), 2)

    def test_study_shaped_file(self):
        lines = ["family_id,role,time,status"]
        relatives = 0
        for index in range(730 + 693):
            family = "F{0:05d}".format(index)
            lines.append("{0},P,{1},{2}".format(family, 50 + index % 15, int(index < 730)))
            for _ in range(5 + index % 2):
                if relatives < 7316:
                    lines.append("{0},R,{1},{2}".format(family, 40 + index % 50, int(index % 3 == 0)))
                    relatives += 1
        ds = parse_csv(self.write("\n".join(lines) + "\n"))
        self.assertEqual((ds.n1, ds.n0), (730, 693))
        self.assertEqual(ds.columns.relative_times.size, 7316)

    def test_written_file_reads_back(self):
        ds = tiny()
        path = os.path.join(self.tmp, "out.csv")
        write_csv(ds, path)
        self.assertEqual(list(dataset_rows(parse_csv(path))), list(dataset_rows(ds)))

    def test_six_decimal_times_survive(self):
        path = self.write("family_id,role,time,status\na,P,64.123456,1\na,R,0.000001,1\nb,P,59.999999,0\n")
        again = os.path.join(self.tmp, "again.csv")
        write_csv(parse_csv(path), again)
        with open(again) as stream:
            text = stream.read()
        self.assertIn("64.123456", text)
        self.assertIn("1e-06", text)
        self.assertIn("59.999999", text)


class TestTables(unittest.TestCase):
    def test_header_and_fingerprint(self):
        path = os.path.join(tempfile.mkdtemp(), "table.tsv")
        try:
            write_tsv(path, ["t", "s"], [(1.0, 0.5), (2, 0.25)], fingerprint="abc123", comments=["bandwidth 0.5"])
            with open(path) as stream:
                lines = stream.read().splitlines()
        finally:
            shutil.rmtree(os.path.dirname(path))

        self.assertEqual(lines[0], "# config abc123")
        self.assertEqual(lines[1], "# bandwidth 0.5")
        self.assertEqual(lines[2], "t\ts")
        self.assertEqual(lines[3:], ["1\t0.5", "2\t0.25"])

    def test_read_back(self):
        columns, rows = read_tsv(io.StringIO("# config x\nh\timse\n0.1\t2.5\n"))
        self.assertEqual(columns, ["h", "imse"])
        self.assertEqual(rows, [[0.1, 2.5]])

    def test_fingerprint_tracks_content(self):
        self.assertNotEqual(config_fingerprint({"seed": 1}), config_fingerprint({"seed": 2}))
        self.assertEqual(config_fingerprint({"a": 1, "b": 2}), config_fingerprint({"b": 2, "a": 1}))
