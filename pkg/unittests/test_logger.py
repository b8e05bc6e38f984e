"""Unit tests for driver log handlers and scene tagging"""
import logging
import shutil
import tempfile
import unittest

from src.commons.logger import NO_SCENE, SceneFilter, initialize_loghandler, scene_context


class TestLogger(unittest.TestCase):
    """Handlers, levels and scene tags"""

    @classmethod
    def setUpClass(cls):
        cls.tmp = tempfile.mkdtemp(prefix="i2preg_log_")
        cls.logger = logging.getLogger("i2preg_test_logger")

    @classmethod
    def tearDownClass(cls):
        for handler in list(cls.logger.handlers):
            cls.logger.removeHandler(handler)
            handler.close()
        shutil.rmtree(cls.tmp, ignore_errors=True)

    def test_scene_tags_nest(self):
        """Inner context wins and the outer one is restored"""
        record = logging.LogRecord("x", logging.INFO, __file__, 1, "msg", None, None)
        SceneFilter().filter(record)
        self.assertEqual(record.scene, NO_SCENE)
        with scene_context("scene_000"):
            with scene_context("scene_001"):
                SceneFilter().filter(record)
                self.assertEqual(record.scene, "scene_001")
            SceneFilter().filter(record)
            self.assertEqual(record.scene, "scene_000")
        SceneFilter().filter(record)
        self.assertEqual(record.scene, NO_SCENE)

    def test_handlers_replaced(self):
        """Repeated initialization keeps one stream and one file handler"""
        initialize_loghandler(self.logger, "unit", verbose=False, log_dir=self.tmp)
        log_path = initialize_loghandler(self.logger, "unit", verbose=True, log_dir=self.tmp)
        self.assertEqual(len(self.logger.handlers), 2)
        self.assertEqual(self.logger.level, logging.DEBUG)
        self.assertTrue(log_path.endswith(".DEBUG"))
        with scene_context("scene_007"):
            self.logger.debug("tagged record")
        for handler in self.logger.handlers:
            handler.flush()
        with open(log_path, "r", encoding="utf-8") as obj:
            self.assertIn("[scene_007]", obj.read())


if __name__ == "__main__":
    unittest.main()
