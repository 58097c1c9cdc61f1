public class FileSystemMasterTest {
    private FileSystemMaster mFileSystem;

    public void mount() throws Exception {
        AlluxioURI alluxioPath = new AlluxioURI("/mnt");
        AlluxioURI ufsPath = new AlluxioURI("s3://bucket/");
        MountOptions mountOptions = MountOptions.defaults();
        mFileSystem.mount(alluxioPath, ufsPath, mountOptions);
        assertTrue(mFileSystem.exists(alluxioPath));
    }
}
